//! Large-N Schwinger-Dyson equations at infinite temperature with
//! random-Lindblad dissipation, on the two-branch (+/-) contour.
//!
//! Conventions, pinned by the free-limit checks below: the components are
//! G_ab(t) = -i < T_c c_a(t) c^dag_b(0) >, so at half filling and infinite
//! temperature the free propagator has G0^{+-} = +i/2, G0^{-+} = -i/2 and
//! step-function (anti-)time-ordered components with the symmetric
//! half-weight value 0 at t = 0. The realized conjugation relation is
//! G_ab(t) = -conj(G_{a'b'}(-t)) with primes flipping the branch.
//!
//! The auxiliary-field sector obeys
//!     Sigma^th_ab(t) = -(K^2/4) G_ab(t)^2,
//!     G^th(omega) = [M - Sigma^th(omega)]^{-1},  M = [[1,0],[-2,1]],
//! and the fermion sector
//!     Sigma_ab(t) = -(J^2 R/N) s_ab G_ab(t)^3
//!                   + (K^2 R/N) (G^th_ab(t) + G^th_ba(-t)) G_ab(t),
//!     G(omega) = [G0(omega)^{-1} - Sigma(omega)]^{-1},
//! with s_{++} = s_{--} = 1, s_{+-} = s_{-+} = -1. The Dyson inversion is
//! evaluated in the difference form [I - G0 Sigma]^{-1} G0, which never
//! inverts the (delta-spiked) free propagator and makes the free theory an
//! exact fixed point of the discretization. Delta-function parts of G^th
//! and Sigma are carried analytically as frequency constants; the product
//! delta(t) G_ab(t) uses the symmetric half-weight value of G at t = 0.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{CoreError, Result};

/// Uniform symmetric time grid: n_t points t_j = (j - n_t/2) dt covering
/// [-t_max, t_max), with dt = 2 t_max / n_t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_t: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_t: usize) -> Result<Self> {
        if t_max <= 0.0 || n_t < 16 || n_t % 4 != 0 {
            return Err(CoreError::domain(
                "time grid needs t_max > 0 and n_t a multiple of 4, >= 16",
            ));
        }
        Ok(TimeGrid { t_max, n_t })
    }

    /// Default grid: t in [-50, 50) at 4096 points (units of 1/J).
    pub fn default_grid() -> Self {
        TimeGrid {
            t_max: 50.0,
            n_t: 4096,
        }
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.t_max / self.n_t as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        (j as f64 - self.n_t as f64 / 2.0) * self.dt()
    }

    pub fn omega(&self, k: usize) -> f64 {
        let d_omega = std::f64::consts::PI / self.t_max;
        (k as f64 - self.n_t as f64 / 2.0) * d_omega
    }

    /// Index of -t_j under the periodic continuation.
    pub fn reflect(&self, j: usize) -> usize {
        (self.n_t - j) % self.n_t
    }

    pub fn zero_index(&self) -> usize {
        self.n_t / 2
    }
}

/// F(omega_k) = dt sum_j f(t_j) e^{+i omega_k t_j} on the symmetric grid.
pub fn ft_time_to_freq(grid: &TimeGrid, f: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n_t;
    debug_assert_eq!(f.len(), n);
    let mut buf: Vec<Complex64> = f
        .iter()
        .enumerate()
        .map(|(j, &v)| if j % 2 == 0 { v } else { -v })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let dt = grid.dt();
    buf.iter_mut().enumerate().for_each(|(k, v)| {
        *v *= dt;
        if k % 2 == 1 {
            *v = -*v;
        }
    });
    buf
}

/// Inverse of [`ft_time_to_freq`].
pub fn ft_freq_to_time(grid: &TimeGrid, f: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n_t;
    debug_assert_eq!(f.len(), n);
    let mut buf: Vec<Complex64> = f
        .iter()
        .enumerate()
        .map(|(k, &v)| if k % 2 == 0 { v } else { -v })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (grid.dt() * n as f64);
    buf.iter_mut().enumerate().for_each(|(j, v)| {
        *v *= scale;
        if j % 2 == 1 {
            *v = -*v;
        }
    });
    buf
}

/// Contour-component two-point functions on a shared grid, stored in
/// branch order [++, +-, -+, --].
#[derive(Debug, Clone)]
pub struct KeldyshGreen {
    pub grid: TimeGrid,
    pub components: [Vec<Complex64>; 4],
}

pub const PP: usize = 0;
pub const PM: usize = 1;
pub const MP: usize = 2;
pub const MM: usize = 3;

impl KeldyshGreen {
    pub fn zeros(grid: TimeGrid) -> Self {
        KeldyshGreen {
            grid,
            components: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); grid.n_t]),
        }
    }

    /// Max-abs difference against another set of components.
    pub fn max_diff(&self, other: &KeldyshGreen) -> f64 {
        let mut d: f64 = 0.0;
        for c in 0..4 {
            for (a, b) in self.components[c].iter().zip(&other.components[c]) {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Residual of G_ab(t) = -conj(G_{a'b'}(-t)) with branch-flipped
    /// indices (++ <-> --, +- and -+ map to themselves).
    pub fn conjugation_residual(&self) -> f64 {
        let n = self.grid.n_t;
        let partner = [MM, PM, MP, PP];
        let mut res: f64 = 0.0;
        for c in 0..4 {
            for j in 1..n {
                let lhs = self.components[c][j];
                let rhs = -self.components[partner[c]][self.grid.reflect(j)].conj();
                res = res.max((lhs - rhs).norm());
            }
        }
        res
    }
}

/// Free contour propagator at infinite temperature and half filling.
pub fn free_green(grid: &TimeGrid) -> KeldyshGreen {
    let n = grid.n_t;
    let mut g = KeldyshGreen::zeros(*grid);
    let half_i = Complex64::new(0.0, 0.5);
    for j in 0..n {
        let t = grid.time(j);
        g.components[PM][j] = half_i;
        g.components[MP][j] = -half_i;
        g.components[PP][j] = match t.partial_cmp(&0.0).unwrap() {
            std::cmp::Ordering::Greater => -half_i,
            std::cmp::Ordering::Less => half_i,
            std::cmp::Ordering::Equal => Complex64::new(0.0, 0.0),
        };
        g.components[MM][j] = match t.partial_cmp(&0.0).unwrap() {
            std::cmp::Ordering::Greater => half_i,
            std::cmp::Ordering::Less => -half_i,
            std::cmp::Ordering::Equal => Complex64::new(0.0, 0.0),
        };
    }
    g
}

/// Physical couplings of the dissipative model.
#[derive(Debug, Clone, Copy)]
pub struct DissipationParams {
    /// Four-fermion coupling scale J.
    pub j: f64,
    /// Jump-operator scale K (E[|K_ij|^2] = K^2/N^2).
    pub k: f64,
    /// The ratio R/N multiplying both self-energy terms.
    pub ratio_rn: f64,
}

/// Contour sign matrix s_ab.
const S_MATRIX: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// M and its inverse for the auxiliary-field sector.
const M_MATRIX: [[f64; 2]; 2] = [[1.0, 0.0], [-2.0, 1.0]];
const M_INverse: [[f64; 2]; 2] = [[1.0, 0.0], [2.0, 1.0]];

/// Auxiliary-field self-energy, time domain.
#[derive(Debug, Clone)]
pub struct SigmaTheta {
    pub components: [Vec<Complex64>; 4],
}

/// Auxiliary-field propagator: a delta-function part (constant in
/// frequency) plus a regular decaying part.
#[derive(Debug, Clone)]
pub struct ThetaGreen {
    pub grid: TimeGrid,
    /// Coefficient of delta(t) per component, i.e. M^{-1} exactly at K = 0.
    pub delta_part: [Complex64; 4],
    pub regular: [Vec<Complex64>; 4],
    /// Number of frequencies where [M - Sigma^th] needed regularization.
    pub regularized_frequencies: usize,
}

fn idx(a: usize, b: usize) -> usize {
    2 * a + b
}

fn inv2(m: [Complex64; 4]) -> Option<[Complex64; 4]> {
    let det = m[0] * m[3] - m[1] * m[2];
    if det.norm() < 1e-300 {
        return None;
    }
    Some([m[3] / det, -m[1] / det, -m[2] / det, m[0] / det])
}

fn mul2(a: [Complex64; 4], b: [Complex64; 4]) -> [Complex64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// Sigma^th_ab(t) = -(K^2/4) G_ab(t)^2 and the auxiliary propagator
/// G^th = [M delta - Sigma^th]^{-1}, split into delta and regular parts.
pub fn theta_step(g: &KeldyshGreen, k: f64) -> (SigmaTheta, ThetaGreen) {
    let grid = g.grid;
    let n = grid.n_t;
    let pref = -k * k / 4.0;
    let sigma = SigmaTheta {
        components: std::array::from_fn(|c| {
            g.components[c].iter().map(|&z| pref * z * z).collect()
        }),
    };

    let sigma_ft: [Vec<Complex64>; 4] =
        std::array::from_fn(|c| ft_time_to_freq(&grid, &sigma.components[c]));

    let m_inv: [Complex64; 4] = [
        Complex64::new(M_INverse[0][0], 0.0),
        Complex64::new(M_INverse[0][1], 0.0),
        Complex64::new(M_INverse[1][0], 0.0),
        Complex64::new(M_INverse[1][1], 0.0),
    ];
    let mut regular_ft: [Vec<Complex64>; 4] =
        std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]);
    let mut regularized = 0usize;
    for w in 0..n {
        let mut a = [
            Complex64::new(M_MATRIX[0][0], 0.0) - sigma_ft[PP][w],
            Complex64::new(M_MATRIX[0][1], 0.0) - sigma_ft[PM][w],
            Complex64::new(M_MATRIX[1][0], 0.0) - sigma_ft[MP][w],
            Complex64::new(M_MATRIX[1][1], 0.0) - sigma_ft[MM][w],
        ];
        let inv = match inv2(a) {
            Some(inv) => inv,
            None => {
                regularized += 1;
                a[0] += Complex64::new(1e-12, 0.0);
                a[3] += Complex64::new(1e-12, 0.0);
                inv2(a).expect("regularized matrix is invertible")
            }
        };
        // Regular part: G^th(omega) - M^{-1}, which decays at large omega.
        for (c, &minv) in m_inv.iter().enumerate() {
            regular_ft[c][w] = inv[c] - minv;
        }
    }
    let regular: [Vec<Complex64>; 4] =
        std::array::from_fn(|c| ft_freq_to_time(&grid, &regular_ft[c]));
    (
        sigma,
        ThetaGreen {
            grid,
            delta_part: m_inv,
            regular,
            regularized_frequencies: regularized,
        },
    )
}

/// Fermionic self-energy: regular time-domain part plus the delta-part
/// coefficients coming from the delta piece of G^th.
#[derive(Debug, Clone)]
pub struct SelfEnergy {
    pub components: [Vec<Complex64>; 4],
    pub delta_part: [Complex64; 4],
}

/// Sigma_ab(t) = -(J^2 R/N) s_ab G_ab^3(t)
///             + (K^2 R/N) (G^th_ab(t) + G^th_ba(-t)) G_ab(t).
pub fn fermion_step(g: &KeldyshGreen, theta: &ThetaGreen, params: &DissipationParams) -> SelfEnergy {
    let grid = g.grid;
    let n = grid.n_t;
    let j_pref = -params.j * params.j * params.ratio_rn;
    let k_pref = params.k * params.k * params.ratio_rn;
    let mut components: [Vec<Complex64>; 4] =
        std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]);
    let mut delta_part = [Complex64::new(0.0, 0.0); 4];
    for a in 0..2 {
        for b in 0..2 {
            let c = idx(a, b);
            let c_t = idx(b, a);
            let s = S_MATRIX[c];
            for jdx in 0..n {
                let gv = g.components[c][jdx];
                let syk = j_pref * s * gv * gv * gv;
                let theta_sym = theta.regular[c][jdx]
                    + theta.regular[c_t][grid.reflect(jdx)];
                components[c][jdx] = syk + k_pref * theta_sym * gv;
            }
            // Delta part: (K^2 R/N)(Minv_ab + Minv_ba) G_ab(0) delta(t);
            // G at t = 0 is the symmetric half-weight grid value.
            let g0 = g.components[c][grid.zero_index()];
            delta_part[c] = k_pref * (theta.delta_part[c] + theta.delta_part[c_t]) * g0;
        }
    }
    SelfEnergy {
        components,
        delta_part,
    }
}

/// Solver controls.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mixing: 0.3,
            tol: 1e-9,
            max_iter: 2000,
        }
    }
}

/// Converged solution with diagnostics.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub green: KeldyshGreen,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub theta_regularizations: usize,
}

/// Damped fixed-point iteration of the coupled equations.
pub fn solve_sd(
    params: &DissipationParams,
    grid: &TimeGrid,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    if !(0.0 < opts.mixing && opts.mixing <= 1.0) {
        return Err(CoreError::domain("mixing must lie in (0, 1]"));
    }
    if opts.tol <= 0.0 {
        return Err(CoreError::domain("tolerance must be positive"));
    }
    let g0 = free_green(grid);
    let g0_ft: [Vec<Complex64>; 4] =
        std::array::from_fn(|c| ft_time_to_freq(grid, &g0.components[c]));

    let mut g = g0.clone();
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut regularized = 0usize;
    for iter in 0..opts.max_iter {
        let (_, theta) = theta_step(&g, params.k);
        regularized += theta.regularized_frequencies;
        let sigma = fermion_step(&g, &theta, params);
        let g_new = dyson(grid, &g0_ft, &sigma)?;
        let residual = g.max_diff(&g_new);
        history.push(residual);
        best = best.min(residual);

        if residual > 1e6 {
            return Err(CoreError::NonConvergence {
                residual,
                iterations: iter + 1,
                hint: ": iteration blew up; reduce mixing".into(),
            });
        }
        if iter > 30 && residual > 5.0 * best {
            return Err(CoreError::NonConvergence {
                residual: best,
                iterations: iter + 1,
                hint: ": residual is oscillating; reduce mixing".into(),
            });
        }

        let m = opts.mixing;
        for c in 0..4 {
            for (cur, new) in g.components[c].iter_mut().zip(&g_new.components[c]) {
                *cur = (1.0 - m) * *cur + m * new;
            }
        }
        if residual < opts.tol {
            return Ok(SolveResult {
                green: g,
                residual_history: history,
                iterations: iter + 1,
                theta_regularizations: regularized,
            });
        }
    }
    Err(CoreError::NonConvergence {
        residual: best,
        iterations: opts.max_iter,
        hint: String::new(),
    })
}

/// One Dyson inversion: G(omega) = [I - G0(omega) Sigma(omega)]^{-1} G0(omega).
pub fn dyson(
    grid: &TimeGrid,
    g0_ft: &[Vec<Complex64>; 4],
    sigma: &SelfEnergy,
) -> Result<KeldyshGreen> {
    let n = grid.n_t;
    let sigma_ft: [Vec<Complex64>; 4] =
        std::array::from_fn(|c| ft_time_to_freq(grid, &sigma.components[c]));
    let one = Complex64::new(1.0, 0.0);
    let mut g_ft: [Vec<Complex64>; 4] =
        std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]);
    for w in 0..n {
        let g0w = [g0_ft[PP][w], g0_ft[PM][w], g0_ft[MP][w], g0_ft[MM][w]];
        let sw = [
            sigma_ft[PP][w] + sigma.delta_part[PP],
            sigma_ft[PM][w] + sigma.delta_part[PM],
            sigma_ft[MP][w] + sigma.delta_part[MP],
            sigma_ft[MM][w] + sigma.delta_part[MM],
        ];
        let prod = mul2(g0w, sw);
        let a = [one - prod[0], -prod[1], -prod[2], one - prod[3]];
        let a_inv = inv2(a).ok_or_else(|| {
            CoreError::numerical(format!(
                "Dyson matrix singular at omega index {w}"
            ))
        })?;
        let gw = mul2(a_inv, g0w);
        for c in 0..4 {
            g_ft[c][w] = gw[c];
        }
    }
    let mut g = KeldyshGreen::zeros(*grid);
    for c in 0..4 {
        g.components[c] = ft_freq_to_time(grid, &g_ft[c]);
    }
    Ok(g)
}
