//! Coupling distributions: dense Gaussian four-fermion tensors, Hermitian
//! rank-two matrices, the low-rank tensors built from them, class-resolved
//! Gaussian variants, and the Bessel product law.
//!
//! A four-index coupling set is stored as a Hermitian matrix over canonical
//! site pairs P = (i<j), so Hermiticity of the Hamiltonian and antisymmetry
//! under index swaps inside a pair hold by construction.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::CMat;
use crate::rng::{complex_gaussian, real_gaussian};
use crate::special::bessel_k0;

/// Whether Gaussian couplings are complex (Hermitian tensor) or all real.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaussianMode {
    #[default]
    Complex,
    Real,
}

/// Index class of a coupling entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingClass {
    /// {i,j} = {k,l}
    Diagonal,
    /// the pairs share exactly one site
    AlmostDiagonal,
    /// all four sites distinct
    OffDiagonal,
}

/// Variance bookkeeping carried by a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceConvention {
    /// Dense model: per-entry variance 2 J^2 / N^3.
    Dense2JsqN3,
    /// Single low-rank layer: off-diagonal variance 2 J^2 / N^4.
    Reduced2JsqN4,
}

/// Classify a canonical index quadruple (requires i<j and k<l).
pub fn classify_indices(i: usize, j: usize, k: usize, l: usize) -> Result<CouplingClass> {
    if i >= j || k >= l {
        return Err(CoreError::domain(format!(
            "classify_indices requires i<j and k<l, got ({i},{j},{k},{l})"
        )));
    }
    let shared = [k, l].iter().filter(|s| **s == i || **s == j).count();
    Ok(match shared {
        2 => CouplingClass::Diagonal,
        1 => CouplingClass::AlmostDiagonal,
        _ => CouplingClass::OffDiagonal,
    })
}

/// Hermitian rank-two coupling matrix J_ik.
#[derive(Debug, Clone)]
pub struct RankTwoCoupling {
    n_sites: usize,
    matrix: CMat,
    variance_param: f64,
}

impl RankTwoCoupling {
    /// Wrap an existing Hermitian matrix (max deviation checked at 1e-12).
    pub fn from_matrix(matrix: CMat, variance_param: f64) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(CoreError::domain("rank-two coupling must be square"));
        }
        if crate::linalg::hermiticity_deviation(&matrix) > 1e-12 {
            return Err(CoreError::domain("rank-two coupling must be Hermitian"));
        }
        Ok(RankTwoCoupling {
            n_sites: n,
            matrix,
            variance_param,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn variance_param(&self) -> f64 {
        self.variance_param
    }
}

/// Antisymmetrized, Hermitian four-index coupling set.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTensor {
    n_sites: usize,
    pairs: Vec<(usize, usize)>,
    /// Hermitian matrix over pair indices; entry (P,Q) is the coupling of
    /// c^dag_i c^dag_j c_k c_l with P=(i<j), Q=(k<l).
    matrix: CMat,
    convention: VarianceConvention,
}

/// Number of canonical pairs i<j for N sites.
pub fn pair_count(n_sites: usize) -> usize {
    n_sites * (n_sites - 1) / 2
}

/// Lexicographic index of the pair (i<j).
pub fn pair_index(n_sites: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n_sites);
    i * (2 * n_sites - i - 1) / 2 + (j - i - 1)
}

/// All canonical pairs in lexicographic order.
pub fn canonical_pairs(n_sites: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(pair_count(n_sites));
    for i in 0..n_sites {
        for j in (i + 1)..n_sites {
            pairs.push((i, j));
        }
    }
    pairs
}

impl CouplingTensor {
    /// Zero tensor.
    pub fn zeros(n_sites: usize, convention: VarianceConvention) -> Self {
        let m = pair_count(n_sites);
        CouplingTensor {
            n_sites,
            pairs: canonical_pairs(n_sites),
            matrix: Array2::zeros((m, m)),
            convention,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn convention(&self) -> VarianceConvention {
        self.convention
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair_matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Coupling for canonical pair indices.
    pub fn canonical_entry(&self, p: usize, q: usize) -> Complex64 {
        self.matrix[[p, q]]
    }

    fn set_canonical(&mut self, p: usize, q: usize, value: Complex64) {
        self.matrix[[p, q]] = value;
        self.matrix[[q, p]] = value.conj();
    }

    /// Coupling J_ijkl for arbitrary distinct i != j, k != l, using the
    /// antisymmetric extension of the canonical storage.
    pub fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> Result<Complex64> {
        if i == j || k == l {
            return Err(CoreError::domain(
                "coupling indices must satisfy i != j, k != l",
            ));
        }
        for s in [i, j, k, l] {
            if s >= self.n_sites {
                return Err(CoreError::domain(format!("site {s} out of range")));
            }
        }
        let mut sign = 1.0;
        let (a, b) = if i < j {
            (i, j)
        } else {
            sign = -sign;
            (j, i)
        };
        let (c, d) = if k < l {
            (k, l)
        } else {
            sign = -sign;
            (l, k)
        };
        let p = pair_index(self.n_sites, a, b);
        let q = pair_index(self.n_sites, c, d);
        Ok(self.matrix[[p, q]] * sign)
    }

    /// Class of the canonical entry at pair indices (p, q).
    pub fn class_at(&self, p: usize, q: usize) -> CouplingClass {
        let (i, j) = self.pairs[p];
        let (k, l) = self.pairs[q];
        classify_indices(i, j, k, l).expect("stored pairs are canonical")
    }

    /// Set the coupling for canonical indices i<j, k<l; the Hermitian
    /// partner entry is fixed by conjugation.
    pub fn set_entry(&mut self, i: usize, j: usize, k: usize, l: usize, value: Complex64) -> Result<()> {
        if i >= j || k >= l {
            return Err(CoreError::domain("set_entry requires i<j and k<l"));
        }
        if j >= self.n_sites || l >= self.n_sites {
            return Err(CoreError::domain("site index out of range"));
        }
        let p = pair_index(self.n_sites, i, j);
        let q = pair_index(self.n_sites, k, l);
        if p == q && value.im != 0.0 {
            return Err(CoreError::domain(
                "pair-diagonal couplings must be real for a Hermitian tensor",
            ));
        }
        self.set_canonical(p, q, value);
        Ok(())
    }

    /// Entry-wise sum; conventions must match.
    pub fn add_assign(&mut self, other: &CouplingTensor) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(CoreError::domain("tensor size mismatch"));
        }
        self.matrix = &self.matrix + &other.matrix;
        Ok(())
    }

    /// Entry-wise real rescaling.
    pub fn scaled(&self, factor: f64) -> CouplingTensor {
        CouplingTensor {
            n_sites: self.n_sites,
            pairs: self.pairs.clone(),
            matrix: self.matrix.mapv(|z| z * factor),
            convention: self.convention,
        }
    }

    /// Max-abs Hermiticity deviation of the pair matrix (0 by construction
    /// for all samplers; nonzero only for hand-built tensors).
    pub fn hermiticity_deviation(&self) -> f64 {
        crate::linalg::hermiticity_deviation(&self.matrix)
    }

    /// Independent canonical entries (p <= q) with their classes.
    pub fn independent_entries(&self) -> impl Iterator<Item = TensorEntry> + '_ {
        let m = self.pairs.len();
        (0..m).flat_map(move |p| {
            (p..m).map(move |q| {
                let (i, j) = self.pairs[p];
                let (k, l) = self.pairs[q];
                TensorEntry {
                    i,
                    j,
                    k,
                    l,
                    value: self.matrix[[p, q]],
                    class: self.class_at(p, q),
                }
            })
        })
    }

    /// Serialize to the documented JSON schema. Only independent entries
    /// (p <= q) are stored; conjugate partners are restored on load.
    pub fn to_json(&self) -> Result<String> {
        let entries: Vec<JsonEntry> = self
            .independent_entries()
            .map(|e| JsonEntry {
                i: e.i,
                j: e.j,
                k: e.k,
                l: e.l,
                re: e.value.re,
                im: e.value.im,
                class: e.class,
            })
            .collect();
        let doc = TensorJson {
            schema_version: 1,
            n_sites: self.n_sites,
            variance_convention: self.convention,
            entries,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TensorJson = serde_json::from_str(text)?;
        if doc.schema_version != 1 {
            return Err(CoreError::domain(format!(
                "unsupported tensor schema version {}",
                doc.schema_version
            )));
        }
        let mut tensor = CouplingTensor::zeros(doc.n_sites, doc.variance_convention);
        for e in &doc.entries {
            if e.i >= e.j || e.k >= e.l {
                return Err(CoreError::domain(
                    "tensor entries must carry canonical i<j, k<l indices",
                ));
            }
            let p = pair_index(doc.n_sites, e.i, e.j);
            let q = pair_index(doc.n_sites, e.k, e.l);
            if p > q {
                return Err(CoreError::domain(
                    "tensor entries must be stored with pair(i,j) <= pair(k,l)",
                ));
            }
            tensor.set_canonical(p, q, Complex64::new(e.re, e.im));
        }
        Ok(tensor)
    }
}

/// One independent tensor entry.
#[derive(Debug, Clone, Copy)]
pub struct TensorEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub value: Complex64,
    pub class: CouplingClass,
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    schema_version: u32,
    n_sites: usize,
    variance_convention: VarianceConvention,
    entries: Vec<JsonEntry>,
}

#[derive(Serialize, Deserialize)]
struct JsonEntry {
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    re: f64,
    im: f64,
    class: CouplingClass,
}

/// Gaussian tensor with a per-class total variance. Pair-diagonal entries
/// (P = Q) are real Gaussians with the same total variance.
fn gaussian_tensor<R: Rng + ?Sized>(
    n_sites: usize,
    convention: VarianceConvention,
    mode: GaussianMode,
    variance_of: impl Fn(CouplingClass) -> f64,
    rng: &mut R,
) -> CouplingTensor {
    let mut tensor = CouplingTensor::zeros(n_sites, convention);
    let m = pair_count(n_sites);
    for p in 0..m {
        for q in p..m {
            let var = variance_of(tensor.class_at(p, q));
            let value = if p == q {
                Complex64::new(real_gaussian(rng, var), 0.0)
            } else {
                match mode {
                    GaussianMode::Complex => complex_gaussian(rng, var),
                    GaussianMode::Real => Complex64::new(real_gaussian(rng, var), 0.0),
                }
            };
            tensor.set_canonical(p, q, value);
        }
    }
    tensor
}

/// Dense Gaussian model: every independent entry has total variance
/// 2 J^2 / N^3, zero mean.
pub fn sample_dense_gaussian<R: Rng + ?Sized>(
    n_sites: usize,
    j: f64,
    rng: &mut R,
) -> Result<CouplingTensor> {
    sample_dense_gaussian_with(n_sites, j, GaussianMode::Complex, rng)
}

pub fn sample_dense_gaussian_with<R: Rng + ?Sized>(
    n_sites: usize,
    j: f64,
    mode: GaussianMode,
    rng: &mut R,
) -> Result<CouplingTensor> {
    if n_sites < 4 {
        return Err(CoreError::domain(format!(
            "dense model needs N >= 4, got {n_sites}"
        )));
    }
    let var = 2.0 * j * j / (n_sites as f64).powi(3);
    Ok(gaussian_tensor(
        n_sites,
        VarianceConvention::Dense2JsqN3,
        mode,
        |_| var,
        rng,
    ))
}

/// Class-resolved Gaussian model with one variance per class.
pub fn sample_mod_syk<R: Rng + ?Sized>(
    n_sites: usize,
    sigma_diagonal: f64,
    sigma_almost: f64,
    sigma_off: f64,
    rng: &mut R,
) -> Result<CouplingTensor> {
    sample_mod_syk_with(
        n_sites,
        sigma_diagonal,
        sigma_almost,
        sigma_off,
        GaussianMode::Complex,
        rng,
    )
}

pub fn sample_mod_syk_with<R: Rng + ?Sized>(
    n_sites: usize,
    sigma_diagonal: f64,
    sigma_almost: f64,
    sigma_off: f64,
    mode: GaussianMode,
    rng: &mut R,
) -> Result<CouplingTensor> {
    for s in [sigma_diagonal, sigma_almost, sigma_off] {
        if s < 0.0 {
            return Err(CoreError::domain("class sigmas must be nonnegative"));
        }
    }
    Ok(gaussian_tensor(
        n_sites,
        VarianceConvention::Dense2JsqN3,
        mode,
        |class| {
            let s = match class {
                CouplingClass::Diagonal => sigma_diagonal,
                CouplingClass::AlmostDiagonal => sigma_almost,
                CouplingClass::OffDiagonal => sigma_off,
            };
            s * s
        },
        rng,
    ))
}

/// Hermitian rank-two Gaussian matrix: off-diagonal E[|J_ik|^2] = sigma^2,
/// real diagonal with variance sigma^2 and zero mean.
pub fn sample_rank_two<R: Rng + ?Sized>(
    n_sites: usize,
    sigma: f64,
    rng: &mut R,
) -> RankTwoCoupling {
    sample_rank_two_with(n_sites, sigma, GaussianMode::Complex, rng)
}

pub fn sample_rank_two_with<R: Rng + ?Sized>(
    n_sites: usize,
    sigma: f64,
    mode: GaussianMode,
    rng: &mut R,
) -> RankTwoCoupling {
    let var = sigma * sigma;
    let mut m = Array2::zeros((n_sites, n_sites));
    for i in 0..n_sites {
        m[[i, i]] = Complex64::new(real_gaussian(rng, var), 0.0);
        for k in (i + 1)..n_sites {
            let z = match mode {
                GaussianMode::Complex => complex_gaussian(rng, var),
                GaussianMode::Real => Complex64::new(real_gaussian(rng, var), 0.0),
            };
            m[[i, k]] = z;
            m[[k, i]] = z.conj();
        }
    }
    RankTwoCoupling {
        n_sites,
        matrix: m,
        variance_param: var,
    }
}

/// Rank-two per-element variance that makes the off-diagonal entries of a
/// low-rank layer come out at 2 J^2 / N^4: the layer entry for disjoint
/// index sets is a difference of two independent products, so its total
/// variance is 2 sigma^4 and sigma^2 = J / N^2.
pub fn lowrank_sigma(n_sites: usize, j: f64) -> f64 {
    (j / (n_sites * n_sites) as f64).sqrt()
}

/// Low-rank tensor J_ik J_jl - J_jk J_il together with the quadratic mass
/// matrix M_il = -sum_j J_ij J_jl that normal ordering produces.
pub fn lowrank_tensor(j2: &RankTwoCoupling) -> (CouplingTensor, CMat) {
    let n = j2.n_sites;
    let jm = &j2.matrix;
    let mut tensor = CouplingTensor::zeros(n, VarianceConvention::Reduced2JsqN4);
    let m = pair_count(n);
    let pairs = canonical_pairs(n);
    for p in 0..m {
        let (i, j) = pairs[p];
        for q in p..m {
            let (k, l) = pairs[q];
            let value = jm[[i, k]] * jm[[j, l]] - jm[[j, k]] * jm[[i, l]];
            tensor.set_canonical(p, q, value);
        }
    }
    let mass = jm.dot(jm).mapv(|z| -z);
    (tensor, mass)
}

/// Scale parameters of the Gaussian-product (Bessel) law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BesselScale {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl BesselScale {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self> {
        if sigma1 <= 0.0 || sigma2 <= 0.0 {
            return Err(CoreError::domain("Bessel scales must be positive"));
        }
        Ok(BesselScale { sigma1, sigma2 })
    }

    /// Symmetric scale: sigma1 = sigma2 = sigma.
    pub fn symmetric(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma)
    }

    /// Product sigma1 * sigma2, the x-scale of the density.
    pub fn product(&self) -> f64 {
        self.sigma1 * self.sigma2
    }
}

/// Density of the product of two independent centered Gaussians:
/// P(x) = K0(|x| / (s1 s2)) / (pi s1 s2). Diverges logarithmically at
/// x = 0, where +infinity is returned.
pub fn bessel_pdf(x: f64, scale: &BesselScale) -> f64 {
    let s = scale.product();
    if x == 0.0 {
        return f64::INFINITY;
    }
    bessel_k0(x.abs() / s) / (std::f64::consts::PI * s)
}

/// One draw of the Gaussian product g1 * g2.
pub fn sample_bessel<R: Rng + ?Sized>(scale: &BesselScale, rng: &mut R) -> f64 {
    real_gaussian(rng, scale.sigma1 * scale.sigma1)
        * real_gaussian(rng, scale.sigma2 * scale.sigma2)
}
