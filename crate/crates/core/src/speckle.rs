//! Simulated speckle detuning fields and the rank-two couplings they
//! imprint on Hermite-Gauss trap modes.
//!
//! The field model is fully developed speckle: a complex Gaussian white
//! field low-pass filtered in k-space to the requested correlation length,
//! whose intensity is exponentially distributed pointwise. The detuning is
//! affine in the normalized intensity with contrast `s`, so it stays
//! positive for s < 1.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::disorder::{
    bessel_pdf, canonical_pairs, classify_indices, BesselScale, CouplingClass, CouplingTensor,
    RankTwoCoupling,
};
use crate::error::{CoreError, Result};
use crate::linalg::CMat;
use crate::rng::stream;
use crate::special::normal_cdf;
use crate::stats;

/// Uniform square grid: nx x ny midpoints over [-extent, extent]^2
/// (lengths in trap-width units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub extent: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, extent: f64) -> Result<Self> {
        if nx < 8 || ny < 8 || extent <= 0.0 {
            return Err(CoreError::domain("grid needs >= 8 points per axis"));
        }
        Ok(Grid2D { nx, ny, extent })
    }

    /// Default arena: 128 x 128 over +-6 trap widths.
    pub fn default_square() -> Self {
        Grid2D {
            nx: 128,
            ny: 128,
            extent: 6.0,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.nx as f64
    }

    pub fn area_element(&self) -> f64 {
        let dy = 2.0 * self.extent / self.ny as f64;
        self.spacing() * dy
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.spacing()
    }

    pub fn y(&self, j: usize) -> f64 {
        let dy = 2.0 * self.extent / self.ny as f64;
        -self.extent + (j as f64 + 0.5) * dy
    }

    pub fn n_points(&self) -> usize {
        self.nx * self.ny
    }
}

/// Speckle generation parameters.
#[derive(Debug, Clone, Copy)]
pub struct SpeckleParams {
    /// Half-decay lag of the intensity autocovariance (trap-width units).
    pub correlation_length: f64,
    /// Contrast s in Delta = mean * (1 + s (I/<I> - 1)); must stay <= 0.8
    /// so the detuning keeps a positive floor.
    pub contrast: f64,
    pub mean_detuning: f64,
}

impl Default for SpeckleParams {
    fn default() -> Self {
        SpeckleParams {
            correlation_length: 0.5,
            contrast: 0.3,
            mean_detuning: 1.0,
        }
    }
}

/// A positive detuning field on a grid.
#[derive(Debug, Clone)]
pub struct SpeckleField {
    pub grid: Grid2D,
    pub detuning: Array2<f64>,
    pub mean_detuning: f64,
    pub correlation_length: f64,
    pub contrast: f64,
}

impl SpeckleField {
    /// Wrap an explicit detuning map (must be positive everywhere).
    pub fn from_detuning(
        grid: Grid2D,
        detuning: Array2<f64>,
        mean_detuning: f64,
        correlation_length: f64,
        contrast: f64,
    ) -> Result<Self> {
        if detuning.dim() != (grid.nx, grid.ny) {
            return Err(CoreError::domain("detuning shape must match the grid"));
        }
        if detuning.iter().any(|&d| d <= 0.0) {
            return Err(CoreError::domain("detuning must be positive everywhere"));
        }
        Ok(SpeckleField {
            grid,
            detuning,
            mean_detuning,
            correlation_length,
            contrast,
        })
    }

    /// Normalized intensity fluctuation (Delta/mean - 1)/s, or zeros for a
    /// uniform field.
    pub fn normalized_fluctuation(&self) -> Array2<f64> {
        if self.contrast == 0.0 {
            return Array2::zeros(self.detuning.dim());
        }
        self.detuning
            .mapv(|d| (d / self.mean_detuning - 1.0) / self.contrast)
    }
}

fn fft2_inverse(data: &mut Array2<Complex64>) {
    let (nx, ny) = data.dim();
    let mut planner = FftPlanner::new();
    let fft_y = planner.plan_fft_inverse(ny);
    for mut row in data.rows_mut() {
        let mut buf: Vec<Complex64> = row.to_vec();
        fft_y.process(&mut buf);
        for (dst, src) in row.iter_mut().zip(buf) {
            *dst = src;
        }
    }
    let fft_x = planner.plan_fft_inverse(nx);
    for mut col in data.columns_mut() {
        let mut buf: Vec<Complex64> = col.to_vec();
        fft_x.process(&mut buf);
        for (dst, src) in col.iter_mut().zip(buf) {
            *dst = src;
        }
    }
}

fn fft_freq(n: usize, spacing: f64, index: usize) -> f64 {
    let half = n / 2;
    let signed = if index <= half {
        index as isize
    } else {
        index as isize - n as isize
    };
    2.0 * std::f64::consts::PI * signed as f64 / (n as f64 * spacing)
}

/// Draw one speckle field: k-space filtered complex Gaussian amplitude,
/// exponential pointwise intensity, detuning affine in intensity.
pub fn generate_speckle<R: Rng + ?Sized>(
    grid: Grid2D,
    params: &SpeckleParams,
    rng: &mut R,
) -> Result<SpeckleField> {
    let s = params.contrast;
    if !(0.0..=0.8).contains(&s) {
        return Err(CoreError::domain(format!(
            "contrast {s} outside [0, 0.8]: detuning floor would drop below 0.2 * mean"
        )));
    }
    if params.correlation_length < 2.0 * grid.spacing() {
        return Err(CoreError::domain(format!(
            "correlation length {} under-resolved: grid spacing {}",
            params.correlation_length,
            grid.spacing()
        )));
    }
    if params.mean_detuning <= 0.0 {
        return Err(CoreError::domain("mean detuning must be positive"));
    }

    // Gaussian white noise in k-space, filtered so the intensity
    // autocovariance |mu|^2 reaches 1/2 at the correlation length: field
    // PSD ~ exp(-k^2 a^2) with a^2 = l^2 / (2 ln 2).
    let a_sq = params.correlation_length.powi(2) / (2.0 * (2.0f64).ln());
    let mut field = Array2::<Complex64>::zeros((grid.nx, grid.ny));
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let z = crate::rng::complex_gaussian(rng, 1.0);
            let kx = fft_freq(grid.nx, grid.spacing(), i);
            let ky = fft_freq(grid.ny, 2.0 * grid.extent / grid.ny as f64, j);
            let k_sq = kx * kx + ky * ky;
            field[[i, j]] = z * (-k_sq * a_sq / 4.0).exp();
        }
    }
    fft2_inverse(&mut field);

    let intensity = field.mapv(|z| z.norm_sqr());
    let mean_i = intensity.sum() / grid.n_points() as f64;
    let detuning = intensity.mapv(|v| params.mean_detuning * (1.0 + s * (v / mean_i - 1.0)));
    if let Some(min) = detuning.iter().cloned().reduce(f64::min) {
        if min <= 0.0 {
            return Err(CoreError::domain(format!(
                "generated detuning reached {min:.3e}; lower the contrast"
            )));
        }
    }
    Ok(SpeckleField {
        grid,
        detuning,
        mean_detuning: params.mean_detuning,
        correlation_length: params.correlation_length,
        contrast: s,
    })
}

/// Orthonormal Hermite-Gauss trap modes sampled on a grid, ordered by
/// oscillator energy nx + ny (ties by nx).
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub grid: Grid2D,
    pub width: f64,
    pub quantum_numbers: Vec<(usize, usize)>,
    modes: Vec<Array2<f64>>,
}

impl ModeSet {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, idx: usize) -> &Array2<f64> {
        &self.modes[idx]
    }

    /// Grid-quadrature Gram matrix (identity to ~1e-6 for resolved modes).
    pub fn gram(&self) -> Array2<f64> {
        let n = self.n_modes();
        let da = self.grid.area_element();
        let mut g = Array2::zeros((n, n));
        for a in 0..n {
            for b in a..n {
                let mut acc = 0.0;
                for (x, y) in self.modes[a].iter().zip(self.modes[b].iter()) {
                    acc += x * y;
                }
                g[[a, b]] = acc * da;
                g[[b, a]] = g[[a, b]];
            }
        }
        g
    }
}

fn hermite_values(max_order: usize, xi: f64) -> Vec<f64> {
    let mut h = vec![0.0; max_order + 1];
    h[0] = 1.0;
    if max_order >= 1 {
        h[1] = 2.0 * xi;
    }
    for m in 1..max_order {
        h[m + 1] = 2.0 * xi * h[m] - 2.0 * m as f64 * h[m - 1];
    }
    h
}

/// Build the first `n_modes` Hermite-Gauss modes of the given width.
pub fn hermite_gauss_modes(grid: Grid2D, n_modes: usize, width: f64) -> Result<ModeSet> {
    if width <= 0.0 || n_modes == 0 {
        return Err(CoreError::domain("need positive width and n_modes >= 1"));
    }
    if 2.0 * grid.extent < 8.0 * width {
        return Err(CoreError::domain(format!(
            "grid extent {} too small for mode width {width}",
            grid.extent
        )));
    }
    // Energy-ordered quantum numbers.
    let mut qns: Vec<(usize, usize)> = Vec::new();
    let mut shell = 0;
    while qns.len() < n_modes {
        for mx in 0..=shell {
            qns.push((mx, shell - mx));
        }
        shell += 1;
    }
    qns.truncate(n_modes);
    let max_order = qns.iter().map(|&(a, b)| a.max(b)).max().unwrap();

    // The highest mode oscillates on the scale width/sqrt(2m+1); demand a
    // few samples per oscillation.
    if grid.spacing() * ((2 * max_order + 1) as f64).sqrt() / width > 0.5 {
        return Err(CoreError::domain(format!(
            "grid spacing {} cannot resolve mode order {max_order}",
            grid.spacing()
        )));
    }

    // 1D normalized oscillator functions tabulated along each axis.
    let norm = |m: usize| {
        let mut log_fact = 0.0;
        for k in 1..=m {
            log_fact += (k as f64).ln();
        }
        (-0.5 * (m as f64 * (2.0f64).ln() + log_fact) - 0.25 * std::f64::consts::PI.ln()).exp()
    };
    let table = |coord: &dyn Fn(usize) -> f64, count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|idx| {
                let xi = coord(idx) / width;
                let h = hermite_values(max_order, xi);
                (0..=max_order)
                    .map(|m| norm(m) * h[m] * (-xi * xi / 2.0).exp() / width.sqrt())
                    .collect()
            })
            .collect()
    };
    let ux = table(&|i| grid.x(i), grid.nx);
    let uy = table(&|j| grid.y(j), grid.ny);

    let modes: Vec<Array2<f64>> = qns
        .iter()
        .map(|&(mx, my)| {
            let mut m = Array2::zeros((grid.nx, grid.ny));
            for i in 0..grid.nx {
                for j in 0..grid.ny {
                    m[[i, j]] = ux[i][mx] * uy[j][my];
                }
            }
            m
        })
        .collect();
    Ok(ModeSet {
        grid,
        width,
        quantum_numbers: qns,
        modes,
    })
}

/// Mode-overlap quadrature against a pointwise weight, through one BLAS
/// product on the flattened mode matrix.
fn weighted_overlap(modes: &ModeSet, weight: &Array2<f64>) -> Array2<f64> {
    let n = modes.n_modes();
    let npts = modes.grid.n_points();
    let da = modes.grid.area_element();
    let mut phi = Array2::<f64>::zeros((n, npts));
    for (a, mode) in modes.modes.iter().enumerate() {
        for (idx, &v) in mode.iter().enumerate() {
            phi[[a, idx]] = v;
        }
    }
    let mut phi_w = phi.clone();
    for (idx, &w) in weight.iter().enumerate() {
        for a in 0..n {
            phi_w[[a, idx]] *= w * da;
        }
    }
    phi_w.dot(&phi.t())
}

/// Rank-two couplings J_ik = (sqrt(E)/2) int phi_i phi_k / (Delta/mean).
pub fn speckle_couplings(
    field: &SpeckleField,
    modes: &ModeSet,
    energy_scale: f64,
) -> Result<RankTwoCoupling> {
    if field.grid != modes.grid {
        return Err(CoreError::domain("field and modes must share a grid"));
    }
    let weight = field.detuning.mapv(|d| field.mean_detuning / d);
    let j = weighted_overlap(modes, &weight);
    let pref = energy_scale.sqrt() / 2.0;
    let n = modes.n_modes();
    let mut m = CMat::zeros((n, n));
    for i in 0..n {
        for k in 0..n {
            // Symmetrize away roundoff asymmetry from the BLAS product.
            let v = 0.5 * (j[[i, k]] + j[[k, i]]) * pref;
            m[[i, k]] = Complex64::new(v, 0.0);
        }
    }
    RankTwoCoupling::from_matrix(m, 0.0)
}

/// Jump-operator coupling proxy K_ij with one extra detuning power:
/// K_ij = k_scale * int phi_i phi_j / (Delta/mean)^2.
pub fn jump_couplings(field: &SpeckleField, modes: &ModeSet, k_scale: f64) -> Result<CMat> {
    if field.grid != modes.grid {
        return Err(CoreError::domain("field and modes must share a grid"));
    }
    let weight = field
        .detuning
        .mapv(|d| (field.mean_detuning / d) * (field.mean_detuning / d));
    let k = weighted_overlap(modes, &weight);
    let n = modes.n_modes();
    let mut m = CMat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = Complex64::new(0.5 * (k[[i, j]] + k[[j, i]]) * k_scale, 0.0);
        }
    }
    Ok(m)
}

/// Per-class statistics of a speckle-derived tensor ensemble.
#[derive(Debug, Clone)]
pub struct ClassStats {
    pub class: CouplingClass,
    /// Pooled variance of the (mean-subtracted) entries.
    pub variance: f64,
    /// KS statistic and p-value of the per-entry standardized pool against
    /// a unit Gaussian.
    pub ks_gaussian: f64,
    pub p_gaussian: f64,
    /// Same against the unit-variance Bessel product law.
    pub ks_bessel: f64,
    pub p_bessel: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone)]
pub struct ClassScanReport {
    pub diagonal: ClassStats,
    pub almost_diagonal: ClassStats,
    pub off_diagonal: ClassStats,
}

/// Class-resolved variances and distribution fits over an ensemble of
/// tensors. Entries are mean-subtracted and standardized per entry
/// position before pooling, so position-dependent variances do not fake
/// heavy tails.
pub fn class_variance_scan(tensors: &[CouplingTensor]) -> Result<ClassScanReport> {
    if tensors.len() < 100 {
        return Err(CoreError::domain("class scan needs an ensemble >= 100"));
    }
    let n = tensors[0].n_sites();
    if tensors.iter().any(|t| t.n_sites() != n) {
        return Err(CoreError::domain("all tensors must share n_sites"));
    }
    let pairs = canonical_pairs(n);
    let m = pairs.len();

    let mut pooled: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut variances = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for p in 0..m {
        for q in p..m {
            let (i, j) = pairs[p];
            let (k, l) = pairs[q];
            let class = classify_indices(i, j, k, l).expect("canonical");
            let slot = class_slot(class);
            let entries: Vec<f64> = tensors
                .iter()
                .map(|t| t.canonical_entry(p, q).re)
                .collect();
            let mean = stats::mean(&entries);
            let var = stats::variance(&entries);
            variances[slot] += var;
            counts[slot] += 1;
            if var > 0.0 {
                let sd = var.sqrt();
                pooled[slot].extend(entries.iter().map(|e| (e - mean) / sd));
            }
        }
    }

    let bessel_cdf = unit_bessel_cdf();
    let build = |slot: usize, class: CouplingClass| -> ClassStats {
        let mut xs = pooled[slot].clone();
        let (ks_g, p_g) = stats::ks_one_sample(&mut xs, normal_cdf);
        let mut xs2 = pooled[slot].clone();
        let (ks_b, p_b) = stats::ks_one_sample(&mut xs2, |x| bessel_cdf.cdf(x));
        ClassStats {
            class,
            variance: variances[slot] / counts[slot].max(1) as f64,
            ks_gaussian: ks_g,
            p_gaussian: p_g,
            ks_bessel: ks_b,
            p_bessel: p_b,
            n_samples: pooled[slot].len(),
        }
    };
    Ok(ClassScanReport {
        diagonal: build(0, CouplingClass::Diagonal),
        almost_diagonal: build(1, CouplingClass::AlmostDiagonal),
        off_diagonal: build(2, CouplingClass::OffDiagonal),
    })
}

fn class_slot(class: CouplingClass) -> usize {
    match class {
        CouplingClass::Diagonal => 0,
        CouplingClass::AlmostDiagonal => 1,
        CouplingClass::OffDiagonal => 2,
    }
}

/// Unit-variance Bessel product CDF on a dense grid.
fn unit_bessel_cdf() -> crate::divergence::DensityGrid {
    let scale = BesselScale::symmetric(1.0).unwrap();
    let spec = crate::divergence::GridSpec::new(30.0, 1 << 17).unwrap();
    crate::divergence::DensityGrid::from_function(&spec, |x| bessel_pdf(x, &scale))
}

/// Configuration of the J-K decorrelation measurement.
#[derive(Debug, Clone)]
pub struct DecorrelationConfig {
    pub grid: Grid2D,
    pub params: SpeckleParams,
    pub n_modes: usize,
    pub mode_width: f64,
    pub r_values: Vec<usize>,
    pub n_members: usize,
    pub master_seed: u64,
    /// Draw the K fields independently of the J fields (null model).
    pub independent_fields: bool,
}

#[derive(Debug, Clone)]
pub struct DecorrelationReport {
    pub r_values: Vec<usize>,
    pub correlations: Vec<f64>,
    /// Coefficient of |corr| = c / R fitted through the origin.
    pub fit_c: f64,
    /// Coefficient of determination of that fit.
    pub fit_r_squared: f64,
}

/// Pearson correlation between the quadratic statistics of summed coupling
/// tensors and summed jump couplings over R shared speckle fields.
///
/// Per ensemble member the statistic pair is (mean |J_sum|^2 over
/// off-diagonal tensor entries, mean |K_sum|^2 over i < j jump entries);
/// both sums run over the same R fields unless `independent_fields`.
pub fn jk_decorrelation(cfg: &DecorrelationConfig) -> Result<DecorrelationReport> {
    if cfg.n_members < 16 {
        return Err(CoreError::domain("need at least 16 ensemble members"));
    }
    let modes = hermite_gauss_modes(cfg.grid, cfg.n_modes, cfg.mode_width)?;
    let mut correlations = Vec::with_capacity(cfg.r_values.len());
    for (ri, &r) in cfg.r_values.iter().enumerate() {
        if r == 0 {
            return Err(CoreError::domain("R must be >= 1"));
        }
        let mut xs = Vec::with_capacity(cfg.n_members);
        let mut ys = Vec::with_capacity(cfg.n_members);
        for member in 0..cfg.n_members {
            let mut j_sum: Option<CouplingTensor> = None;
            let mut k_sum: Option<CMat> = None;
            for alpha in 0..r {
                let idx = ((ri * cfg.n_members + member) * r + alpha) as u64;
                let mut rng = stream(cfg.master_seed, idx);
                let field = generate_speckle(cfg.grid, &cfg.params, &mut rng)?;
                let j2 = speckle_couplings(&field, &modes, 1.0)?;
                let (tensor, _) = crate::disorder::lowrank_tensor(&j2);
                match &mut j_sum {
                    Some(acc) => acc.add_assign(&tensor)?,
                    None => j_sum = Some(tensor),
                }
                let k_field = if cfg.independent_fields {
                    let mut rng2 = stream(cfg.master_seed ^ 0x9e37_79b9_7f4a_7c15, idx);
                    generate_speckle(cfg.grid, &cfg.params, &mut rng2)?
                } else {
                    field
                };
                let k = jump_couplings(&k_field, &modes, 1.0)?;
                match &mut k_sum {
                    Some(acc) => *acc = acc.clone() + &k,
                    None => k_sum = Some(k),
                }
            }
            let j_sum = j_sum.expect("r >= 1");
            let k_sum = k_sum.expect("r >= 1");
            let mut j_stat = 0.0;
            let mut j_count = 0usize;
            for e in j_sum.independent_entries() {
                if e.class == CouplingClass::OffDiagonal {
                    j_stat += e.value.norm_sqr();
                    j_count += 1;
                }
            }
            let mut k_stat = 0.0;
            let mut k_count = 0usize;
            for i in 0..cfg.n_modes {
                for j in (i + 1)..cfg.n_modes {
                    k_stat += k_sum[[i, j]].norm_sqr();
                    k_count += 1;
                }
            }
            xs.push(j_stat / j_count.max(1) as f64);
            ys.push(k_stat / k_count.max(1) as f64);
        }
        correlations.push(stats::pearson(&xs, &ys));
    }
    let inv_r: Vec<f64> = cfg.r_values.iter().map(|&r| 1.0 / r as f64).collect();
    let abs_corr: Vec<f64> = correlations.iter().map(|c| c.abs()).collect();
    let (fit_c, _) = stats::fit_through_origin(&inv_r, &abs_corr);
    let mean_y = stats::mean(&abs_corr);
    let ss_tot: f64 = abs_corr.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: f64 = inv_r
        .iter()
        .zip(&abs_corr)
        .map(|(&x, &y)| (y - fit_c * x) * (y - fit_c * x))
        .sum();
    let fit_r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecorrelationReport {
        r_values: cfg.r_values.clone(),
        correlations,
        fit_c,
        fit_r_squared,
    })
}
