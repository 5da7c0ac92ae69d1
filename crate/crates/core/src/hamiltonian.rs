//! Dense Hamiltonian assembly from coupling tensors, plus layered families
//! and their exact sum.
//!
//! The interaction sum runs over all ordered canonical pair combinations
//! (P, Q) of the Hermitian pair matrix, so the assembled matrix is Hermitian
//! without an explicit h.c. step. The normal-ordering bookkeeping against
//! the quadratic form O = sum J_ik c^dag_i c_k is
//! `H_int = ((J.J)-term - O^2) / 2`, which fixes both the sign of the mass
//! matrix and the factor between restricted and unrestricted index sums;
//! see the brute-force equivalence test below.

use std::sync::Arc;

use num_complex::Complex64;

use crate::disorder::{lowrank_sigma, lowrank_tensor, sample_rank_two, CouplingTensor};
use crate::error::{CoreError, Result};
use crate::fock::{BasisRef, FockBasis, Sector};
use crate::linalg::{frobenius_norm, hermiticity_deviation, CMat};
use crate::rng::stream;

/// Where a Hamiltonian came from, for provenance in output files.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub model: String,
    pub seed: Option<u64>,
    pub layer: Option<usize>,
}

/// Dense Hermitian Hamiltonian on a fixed basis.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    pub basis: BasisRef,
    pub matrix: CMat,
    pub provenance: Provenance,
}

impl HamiltonianMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.matrix)
    }
}

/// Assemble `sum_{P,Q} J_PQ c^dag_i c^dag_j c_k c_l + sum_il M_il c^dag_i c_l`
/// on the given basis.
pub fn build_hamiltonian(
    basis: &BasisRef,
    tensor: &CouplingTensor,
    mass: Option<&CMat>,
) -> Result<HamiltonianMatrix> {
    let n = basis.n_sites();
    if tensor.n_sites() != n {
        return Err(CoreError::domain(format!(
            "tensor is for N = {} but basis has N = {n}",
            tensor.n_sites()
        )));
    }
    if let Some(m) = mass {
        if m.nrows() != n || m.ncols() != n {
            return Err(CoreError::domain("mass matrix must be N x N"));
        }
    }
    let d = basis.dimension();
    let mut h = CMat::zeros((d, d));
    let pairs = tensor.pairs();

    // Interaction part, accumulated by direct bit action per basis state.
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for (q, &(k, l)) in pairs.iter().enumerate() {
            let coeff = tensor.canonical_entry(p, q);
            if coeff == Complex64::new(0.0, 0.0) {
                continue;
            }
            accumulate_two_body(basis, &mut h, coeff, i, j, k, l);
        }
    }

    if let Some(m) = mass {
        for i in 0..n {
            for l in 0..n {
                let coeff = m[[i, l]];
                if coeff == Complex64::new(0.0, 0.0) {
                    continue;
                }
                accumulate_quadratic(basis, &mut h, coeff, i, l);
            }
        }
    }

    let built = HamiltonianMatrix {
        basis: Arc::clone(basis),
        matrix: h,
        provenance: Provenance::default(),
    };
    debug_assert!(built.hermiticity_deviation() < 1e-12);
    Ok(built)
}

fn accumulate_two_body(
    basis: &FockBasis,
    h: &mut CMat,
    coeff: Complex64,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) {
    use crate::fock::{annihilate, create};
    for (col, &s) in basis.states().iter().enumerate() {
        let Some((s1, g1)) = annihilate(s, l) else {
            continue;
        };
        let Some((s2, g2)) = annihilate(s1, k) else {
            continue;
        };
        let Some((s3, g3)) = create(s2, j) else {
            continue;
        };
        let Some((s4, g4)) = create(s3, i) else {
            continue;
        };
        let row = basis.index_of(s4).expect("charge conserved");
        h[[row, col]] += coeff * (g1 * g2 * g3 * g4);
    }
}

fn accumulate_quadratic(basis: &FockBasis, h: &mut CMat, coeff: Complex64, i: usize, l: usize) {
    use crate::fock::{annihilate, create};
    for (col, &s) in basis.states().iter().enumerate() {
        let Some((s1, g1)) = annihilate(s, l) else {
            continue;
        };
        let Some((s2, g2)) = create(s1, i) else {
            continue;
        };
        let row = basis.index_of(s2).expect("charge conserved");
        h[[row, col]] += coeff * (g1 * g2);
    }
}

/// One disorder layer: interaction Hamiltonian plus the retained mass matrix.
#[derive(Debug, Clone)]
pub struct Layer {
    pub hamiltonian: HamiltonianMatrix,
    pub tensor: CouplingTensor,
    /// N x N quadratic coefficients produced by normal ordering; not folded
    /// into `hamiltonian`, kept for diagnostics.
    pub mass_matrix: CMat,
}

/// Build R independent low-rank layers (reduced variance convention) and
/// their exact matrix sum.
pub fn build_layers(
    basis: &BasisRef,
    j: f64,
    r: usize,
    master_seed: u64,
) -> Result<(Vec<Layer>, HamiltonianMatrix)> {
    if r == 0 {
        return Err(CoreError::domain("layer count R must be at least 1"));
    }
    let n = basis.n_sites();
    let sigma = lowrank_sigma(n, j);
    let mut layers = Vec::with_capacity(r);
    for alpha in 0..r {
        let mut rng = stream(master_seed, alpha as u64);
        let j2 = sample_rank_two(n, sigma, &mut rng);
        let (tensor, mass) = lowrank_tensor(&j2);
        let mut h = build_hamiltonian(basis, &tensor, None)?;
        h.provenance = Provenance {
            model: "lowrank".into(),
            seed: Some(master_seed),
            layer: Some(alpha),
        };
        layers.push(Layer {
            hamiltonian: h,
            tensor,
            mass_matrix: mass,
        });
    }
    let d = basis.dimension();
    let mut sum = CMat::zeros((d, d));
    for layer in &layers {
        sum = sum + &layer.hamiltonian.matrix;
    }
    let h_sim = HamiltonianMatrix {
        basis: Arc::clone(basis),
        matrix: sum,
        provenance: Provenance {
            model: "lowrank-sum".into(),
            seed: Some(master_seed),
            layer: None,
        },
    };
    Ok((layers, h_sim))
}

/// Frobenius-norm weight of the mass term relative to the interaction,
/// per layer and averaged.
pub fn mass_term_weight(layers: &[Layer]) -> Result<MassWeight> {
    let mut per_layer = Vec::with_capacity(layers.len());
    for layer in layers {
        let basis = &layer.hamiltonian.basis;
        let mass_h = build_hamiltonian(basis, &CouplingTensor::zeros(
            basis.n_sites(),
            layer.tensor.convention(),
        ), Some(&layer.mass_matrix))?;
        let num = frobenius_norm(&mass_h.matrix);
        let den = frobenius_norm(&layer.hamiltonian.matrix);
        per_layer.push(if den > 0.0 { num / den } else { 0.0 });
    }
    let mean = per_layer.iter().sum::<f64>() / per_layer.len().max(1) as f64;
    Ok(MassWeight { per_layer, mean })
}

#[derive(Debug, Clone)]
pub struct MassWeight {
    pub per_layer: Vec<f64>,
    pub mean: f64,
}

/// Little-endian binary dump: header (N, D, sector tag, Q), then row-major
/// complex doubles. `sector` is 0 for the full space, 1 for fixed charge.
pub fn write_binary(h: &HamiltonianMatrix, out: &mut impl std::io::Write) -> Result<()> {
    let (tag, q) = match h.basis.sector() {
        Sector::FullSpace => (0u32, 0u32),
        Sector::FixedCharge(q) => (1u32, q as u32),
    };
    out.write_all(&(h.basis.n_sites() as u32).to_le_bytes())?;
    out.write_all(&(h.dimension() as u32).to_le_bytes())?;
    out.write_all(&tag.to_le_bytes())?;
    out.write_all(&q.to_le_bytes())?;
    for z in h.matrix.iter() {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_dense_gaussian, RankTwoCoupling, VarianceConvention};
    use crate::fock::{number_operator, quadratic_term};
    use crate::linalg::{hermitian_eig, max_abs_diff};
    use crate::stats;

    fn full_basis(n: usize) -> BasisRef {
        Arc::new(FockBasis::build(n, Sector::FullSpace).unwrap())
    }

    #[test]
    fn zero_inputs_give_zero_matrix() {
        let basis = full_basis(4);
        let t = CouplingTensor::zeros(4, VarianceConvention::Dense2JsqN3);
        let h = build_hamiltonian(&basis, &t, None).unwrap();
        assert!(h.matrix.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_entry_two_site_hamiltonian() {
        // J_0101 = 1 on N=2: H = T(0,1,0,1) = diag(0,0,0,-1) in occupation
        // order; oracle is the explicit 4x4 Jordan-Wigner product.
        let basis = full_basis(2);
        let mut t = CouplingTensor::zeros(2, VarianceConvention::Dense2JsqN3);
        t.set_entry(0, 1, 0, 1, Complex64::new(1.0, 0.0)).unwrap();
        let h = build_hamiltonian(&basis, &t, None).unwrap();

        let oracle = {
            let c0 = crate::fock::annihilator(&basis, 0).unwrap().to_dense();
            let c1 = crate::fock::annihilator(&basis, 1).unwrap().to_dense();
            c0.t()
                .mapv(|z| z.conj())
                .dot(&c1.t().mapv(|z| z.conj()))
                .dot(&c0)
                .dot(&c1)
        };
        assert!(max_abs_diff(&h.matrix, &oracle) < 1e-15);
        for (idx, expect) in [0.0, 0.0, 0.0, -1.0].iter().enumerate() {
            assert!((h.matrix[[idx, idx]].re - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn random_hamiltonian_spectrum_and_trace() {
        let n = 6;
        let basis = full_basis(n);
        let mut rng = stream(5, 0);
        let t = sample_dense_gaussian(n, 1.0, &mut rng).unwrap();
        let h = build_hamiltonian(&basis, &t, None).unwrap();
        assert!(h.hermiticity_deviation() < 1e-12);

        // Trace oracle: only P=Q terms are diagonal; T(i,j,i,j) = -n_i n_j,
        // whose full-space trace is -2^(N-2).
        let mut expect = Complex64::new(0.0, 0.0);
        for e in t.independent_entries() {
            if (e.i, e.j) == (e.k, e.l) {
                expect += e.value * Complex64::new(-(1 << (n - 2)) as f64, 0.0);
            }
        }
        let tr: Complex64 = (0..h.dimension()).map(|i| h.matrix[[i, i]]).sum();
        assert!((tr - expect).norm() < 1e-10);

        let (evals, _) = hermitian_eig(&h.matrix).unwrap();
        let sum: f64 = evals.iter().sum();
        assert!((sum - expect.re).abs() < 1e-8);
    }

    #[test]
    fn linearity_in_the_tensor() {
        // H(a T1 + b T2) = a H(T1) + b H(T2) for real a, b.
        let n = 5;
        let basis = full_basis(n);
        let mut rng = stream(6, 0);
        let t1 = sample_dense_gaussian(n, 1.0, &mut rng).unwrap();
        let t2 = sample_dense_gaussian(n, 1.0, &mut rng).unwrap();
        let (a, b) = (0.7, -1.3);
        let mut combo = t1.scaled(a);
        combo.add_assign(&t2.scaled(b)).unwrap();
        let h_combo = build_hamiltonian(&basis, &combo, None).unwrap();
        let h1 = build_hamiltonian(&basis, &t1, None).unwrap();
        let h2 = build_hamiltonian(&basis, &t2, None).unwrap();
        let expect = h1.matrix.mapv(|z| z * a) + h2.matrix.mapv(|z| z * b);
        assert!(max_abs_diff(&h_combo.matrix, &expect) < 1e-12);
    }

    #[test]
    fn normal_ordered_square_equivalence() {
        // H_int built from the low-rank tensor equals ((J.J)-term - O^2)/2
        // with O = sum_ik J_ik c^dag_i c_k, on N <= 6 full space.
        for n in 3..=6 {
            let basis = full_basis(n);
            let mut rng = stream(40 + n as u64, 0);
            let j2 = sample_rank_two(n, 0.6, &mut rng);
            let (tensor, mass) = lowrank_tensor(&j2);
            let h_int = build_hamiltonian(&basis, &tensor, None).unwrap();

            let d = basis.dimension();
            let mut o = CMat::zeros((d, d));
            for i in 0..n {
                for k in 0..n {
                    quadratic_term(&basis, i, k)
                        .unwrap()
                        .scaled_add_to(&mut o, j2.matrix()[[i, k]]);
                }
            }
            let o_sq = o.dot(&o);
            // (J.J)_il c^dag_i c_l = -mass term.
            let jj = j2.matrix().dot(j2.matrix());
            let mut quad = CMat::zeros((d, d));
            for i in 0..n {
                for l in 0..n {
                    quadratic_term(&basis, i, l)
                        .unwrap()
                        .scaled_add_to(&mut quad, jj[[i, l]]);
                }
            }
            let expect = (quad - o_sq).mapv(|z| z * 0.5);
            assert!(
                max_abs_diff(&h_int.matrix, &expect) < 1e-12,
                "normal-ordering bookkeeping failed at N={n}"
            );
            // Consistency of the returned mass matrix with the same product.
            assert!(max_abs_diff(&mass, &j2.matrix().dot(j2.matrix()).mapv(|z| -z)) < 1e-14);
        }
    }

    #[test]
    fn fixed_charge_commutes_with_number() {
        let basis = Arc::new(FockBasis::build(6, Sector::FixedCharge(3)).unwrap());
        let mut rng = stream(8, 0);
        let t = sample_dense_gaussian(6, 1.0, &mut rng).unwrap();
        let h = build_hamiltonian(&basis, &t, None).unwrap();
        let n_op = number_operator(&basis).to_dense();
        let comm = h.matrix.dot(&n_op) - n_op.dot(&h.matrix);
        assert!(comm.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn layers_sum_exactly() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (layers, h_sim) = build_layers(&basis, 1.0, 4, 77).unwrap();
        assert_eq!(layers.len(), 4);
        let mut manual = CMat::zeros(h_sim.matrix.dim());
        for l in &layers {
            manual = manual + &l.hamiltonian.matrix;
        }
        assert!(max_abs_diff(&manual, &h_sim.matrix) < 1e-12);

        // R = 1: the sum is the single layer.
        let (single, h1) = build_layers(&basis, 1.0, 1, 78).unwrap();
        assert!(max_abs_diff(&single[0].hamiltonian.matrix, &h1.matrix) < 1e-15);

        // Permuting layer order cannot change the sum; rebuild with the same
        // seed and add in reverse.
        let mut reversed = CMat::zeros(h_sim.matrix.dim());
        for l in layers.iter().rev() {
            reversed = reversed + &l.hamiltonian.matrix;
        }
        assert!(max_abs_diff(&reversed, &h_sim.matrix) < 1e-12);
    }

    #[test]
    fn summed_layer_variance_reaches_dense_convention() {
        // R = N layers: summed off-diagonal variance 2 J^2 / N^3 within 10%.
        let n = 10;
        let jj = 1.0;
        let target = 2.0 * jj * jj / (n as f64).powi(3);
        let mut pooled = Vec::new();
        for rep in 0..40 {
            let mut sum = CouplingTensor::zeros(n, VarianceConvention::Reduced2JsqN4);
            for alpha in 0..n {
                let mut rng = stream(1000 + rep, alpha as u64);
                let (t, _) = lowrank_tensor(&sample_rank_two(n, lowrank_sigma(n, jj), &mut rng));
                sum.add_assign(&t).unwrap();
            }
            for e in sum.independent_entries() {
                if e.class == crate::disorder::CouplingClass::OffDiagonal {
                    pooled.push(e.value.norm_sqr());
                }
            }
        }
        let var = stats::mean(&pooled);
        assert!(
            (var - target).abs() / target < 0.10,
            "summed variance {var:.4e} vs {target:.4e}"
        );
    }

    #[test]
    fn mass_weight_closed_form_and_scaling() {
        // Deterministic J = lambda I: interaction is -lambda^2 sum_{i<j} n_i n_j,
        // mass part is -lambda^2 * total number operator.
        let n = 4;
        let basis = full_basis(n);
        let lambda = 0.9;
        let j2 =
            RankTwoCoupling::from_matrix(CMat::eye(n).mapv(|z| z * lambda), 0.0).unwrap();
        let (tensor, mass) = lowrank_tensor(&j2);
        let h = build_hamiltonian(&basis, &tensor, None).unwrap();
        let layer = Layer {
            hamiltonian: h,
            tensor,
            mass_matrix: mass,
        };
        let w = mass_term_weight(std::slice::from_ref(&layer)).unwrap();
        // ||n_tot||_F^2 = sum_s (popcount)^2 = sum_k C(N,k) k^2; the
        // interaction norm over pairs: sum_s (pairs occupied)^2.
        let norm_mass: f64 = (0..1u64 << n)
            .map(|s| (s.count_ones() as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm_int: f64 = (0..1u64 << n)
            .map(|s| {
                let k = s.count_ones() as f64;
                (k * (k - 1.0) / 2.0).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let expect = norm_mass / norm_int;
        assert!((w.mean - expect).abs() < 1e-12, "{} vs {expect}", w.mean);

        // Zero mass gives zero weight.
        let zero_layer = Layer {
            mass_matrix: CMat::zeros((n, n)),
            ..layer.clone()
        };
        assert_eq!(mass_term_weight(&[zero_layer]).unwrap().mean, 0.0);
    }

    #[test]
    fn mass_weight_decreases_with_system_size() {
        let weight_at = |n: usize, seed: u64| {
            let basis = Arc::new(FockBasis::half_filling(n).unwrap());
            let (layers, _) = build_layers(&basis, 1.0, 3, seed).unwrap();
            mass_term_weight(&layers).unwrap().mean
        };
        let w6: f64 = (0..4).map(|s| weight_at(6, 200 + s)).sum::<f64>() / 4.0;
        let w12: f64 = (0..4).map(|s| weight_at(12, 300 + s)).sum::<f64>() / 4.0;
        assert!(
            w12 < w6,
            "mass weight should shrink with N: w6 = {w6}, w12 = {w12}"
        );
    }

    #[test]
    fn ensemble_spectral_density_symmetric() {
        let n = 12;
        let basis = Arc::new(FockBasis::half_filling(n).unwrap());
        let mut pooled = Vec::new();
        for rep in 0..6 {
            let mut rng = stream(500, rep);
            let t = sample_dense_gaussian(n, 1.0, &mut rng).unwrap();
            let h = build_hamiltonian(&basis, &t, None).unwrap();
            let (evals, _) = hermitian_eig(&h.matrix).unwrap();
            pooled.extend(evals.iter().copied());
        }
        let skew = stats::skewness(&pooled);
        assert!(
            skew.abs() < 0.1,
            "disorder-averaged spectral density should be symmetric, skewness {skew}"
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let basis = full_basis(4);
        let t = CouplingTensor::zeros(5, VarianceConvention::Dense2JsqN3);
        assert!(matches!(
            build_hamiltonian(&basis, &t, None),
            Err(CoreError::Domain(_))
        ));
    }

    #[test]
    fn binary_dump_layout() {
        let basis = Arc::new(FockBasis::build(3, Sector::FixedCharge(1)).unwrap());
        let t = CouplingTensor::zeros(3, VarianceConvention::Dense2JsqN3);
        let h = build_hamiltonian(&basis, &t, None).unwrap();
        let mut buf = Vec::new();
        write_binary(&h, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16 * 9 * 2 / 2);
        assert_eq!(u32::from_le_bytes(buf[0..4].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 1);
    }
}
