//! Disorder-averaged chaos diagnostics: spectral form factor, out-of-time
//! order correlators, and level-spacing statistics, for exact and
//! Trotterized evolutions.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::fock::{annihilator, creator, FockBasis, Sector};
use crate::hamiltonian::HamiltonianMatrix;
use crate::linalg::{hermitian_eig, CMat};
use crate::report::fmt_e12;
use crate::trotter::{cycle_unitary, unitary_eigenphases, CircuitSchedule};

/// Metadata attached to every computed curve.
#[derive(Debug, Clone, Default)]
pub struct SeriesMeta {
    pub observable: String,
    pub n_sites: usize,
    pub sector: String,
    pub r_layers: Option<usize>,
    pub n_realizations: usize,
    pub seed: Option<u64>,
}

/// A real-valued observable on a strictly increasing time grid.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, meta: SeriesMeta) -> Result<Self> {
        if times.len() != values.len() {
            return Err(CoreError::domain("times and values must match in length"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::domain("times must be strictly increasing"));
        }
        Ok(TimeSeries {
            times,
            values,
            stderr: None,
            meta,
        })
    }

    /// CSV rows `(t, mean, stderr, n_realizations)` in %.12e format.
    pub fn to_csv(&self) -> String {
        let n = self.meta.n_realizations.max(1);
        let mut rows = Vec::with_capacity(self.times.len());
        for (i, (&t, &v)) in self.times.iter().zip(&self.values).enumerate() {
            let se = self.stderr.as_ref().map_or(0.0, |s| s[i]);
            rows.push(vec![
                fmt_e12(t),
                fmt_e12(v),
                fmt_e12(se),
                n.to_string(),
            ]);
        }
        crate::report::csv_table(&["t", "mean", "stderr", "n_realizations"], &rows)
    }
}

fn sector_label(sector: Sector) -> String {
    match sector {
        Sector::FullSpace => "full".to_string(),
        Sector::FixedCharge(q) => format!("Q={q}"),
    }
}

/// Spectral form factor |Tr U(t)|^2 / D^2 from the eigenphases of an exact
/// evolution.
pub fn sff_exact(h: &HamiltonianMatrix, times: &[f64]) -> Result<TimeSeries> {
    let (evals, _) = hermitian_eig(&h.matrix)?;
    let d = h.dimension() as f64;
    let values: Vec<f64> = times
        .iter()
        .map(|&t| {
            let tr: Complex64 = evals
                .iter()
                .map(|&e| Complex64::from_polar(1.0, -e * t))
                .sum();
            tr.norm_sqr() / (d * d)
        })
        .collect();
    TimeSeries::new(
        times.to_vec(),
        values,
        SeriesMeta {
            observable: "sff".into(),
            n_sites: h.basis.n_sites(),
            sector: sector_label(h.basis.sector()),
            r_layers: None,
            n_realizations: 1,
            seed: h.provenance.seed,
        },
    )
}

/// SFF of the Trotterized evolution at stroboscopic times.
///
/// One full layer cycle advances the simulated time by dt, so every
/// requested time must be an integer multiple of the cycle step; anything
/// else is a domain error. The cycle unitary is diagonalized once and each
/// time point costs O(D).
pub fn sff_schedule(schedule: &CircuitSchedule, times: &[f64]) -> Result<TimeSeries> {
    let cycle = cycle_unitary(&schedule.layers, schedule.dt)?;
    let phases = unitary_eigenphases(&cycle)?;
    let d = cycle.dimension() as f64;
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let cycles = stroboscopic_index(t, schedule.dt)?;
        let tr: Complex64 = phases
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p * cycles as f64))
            .sum();
        values.push(tr.norm_sqr() / (d * d));
    }
    TimeSeries::new(
        times.to_vec(),
        values,
        SeriesMeta {
            observable: "sff-trotter".into(),
            n_sites: schedule.basis().n_sites(),
            sector: sector_label(schedule.basis().sector()),
            r_layers: Some(schedule.r_layers()),
            n_realizations: 1,
            seed: None,
        },
    )
}

/// Number of completed cycles at time `t` (must be an integer multiple of dt).
fn stroboscopic_index(t: f64, dt: f64) -> Result<u64> {
    let ratio = t / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.abs().max(1.0) || n < 0.0 {
        return Err(CoreError::domain(format!(
            "time {t} is not a stroboscopic multiple of dt = {dt}"
        )));
    }
    Ok(n as u64)
}

/// Log-spaced stroboscopic grid: unique cycle counts between `n_min` and
/// `n_max`, roughly `points` of them, mapped to times n*dt.
pub fn stroboscopic_log_times(dt: f64, n_min: u64, n_max: u64, points: usize) -> Vec<f64> {
    let mut ns: Vec<u64> = Vec::with_capacity(points);
    let (lo, hi) = ((n_min.max(1)) as f64, n_max as f64);
    for i in 0..points {
        let f = i as f64 / (points.saturating_sub(1).max(1)) as f64;
        let n = (lo * (hi / lo).powf(f)).round() as u64;
        ns.push(n);
    }
    ns.dedup();
    ns.iter().map(|&n| n as f64 * dt).collect()
}

/// Out-of-time-order correlator pair: F(t) = Re Tr[W(t) V W(t) V] / D for
/// Hermitian unitary site quadratures W = c_w + c^dag_w, plus the squared
/// commutator form C(t) = 2 (1 - F(t)/F(0)).
#[derive(Debug, Clone)]
pub struct OtocPair {
    pub f: TimeSeries,
    pub c: TimeSeries,
}

/// Which site operators enter the OTOC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OtocOperators {
    /// Hermitian quadratures c + c^dag (unitary, mutually anticommuting).
    #[default]
    Quadrature,
    /// Site occupations n_i (Hermitian, not unitary).
    Number,
}

pub fn otoc(
    h: &HamiltonianMatrix,
    site_w: usize,
    site_v: usize,
    times: &[f64],
) -> Result<OtocPair> {
    otoc_with(h, site_w, site_v, times, OtocOperators::Quadrature)
}

pub fn otoc_with(
    h: &HamiltonianMatrix,
    site_w: usize,
    site_v: usize,
    times: &[f64],
    ops: OtocOperators,
) -> Result<OtocPair> {
    if site_w == site_v {
        return Err(CoreError::domain("OTOC sites must be distinct"));
    }
    if h.basis.sector() != Sector::FullSpace && ops == OtocOperators::Quadrature {
        return Err(CoreError::domain(
            "quadrature OTOCs need the full space: c + c^dag changes charge",
        ));
    }
    let basis = &h.basis;
    let w = site_operator(basis, site_w, ops)?;
    let v = site_operator(basis, site_v, ops)?;

    let (evals, q) = hermitian_eig(&h.matrix)?;
    let qdag = q.t().mapv(|z| z.conj());
    let w_eig = qdag.dot(&w).dot(&q);
    let v_eig = qdag.dot(&v).dot(&q);
    let d = basis.dimension();

    let mut f_vals = Vec::with_capacity(times.len());
    for &t in times {
        // W(t) in the eigenbasis: phases e^{i (E_a - E_b) t} elementwise.
        let mut wt = Array2::<Complex64>::zeros((d, d));
        for a in 0..d {
            for b in 0..d {
                let phase = Complex64::from_polar(1.0, (evals[a] - evals[b]) * t);
                wt[[a, b]] = phase * w_eig[[a, b]];
            }
        }
        let m = wt.dot(&v_eig);
        // Tr[(W(t) V)^2] without forming the second product.
        let mut tr = Complex64::new(0.0, 0.0);
        for a in 0..d {
            for b in 0..d {
                tr += m[[a, b]] * m[[b, a]];
            }
        }
        f_vals.push(tr.re / d as f64);
    }

    let meta = SeriesMeta {
        observable: "otoc-f".into(),
        n_sites: basis.n_sites(),
        sector: sector_label(basis.sector()),
        r_layers: None,
        n_realizations: 1,
        seed: h.provenance.seed,
    };
    let f0 = f_vals[0];
    let c_vals: Vec<f64> = f_vals.iter().map(|&f| 2.0 * (1.0 - f / f0)).collect();
    let f = TimeSeries::new(times.to_vec(), f_vals, meta.clone())?;
    let mut c_meta = meta;
    c_meta.observable = "otoc-c".into();
    let c = TimeSeries::new(times.to_vec(), c_vals, c_meta)?;
    Ok(OtocPair { f, c })
}

fn site_operator(basis: &FockBasis, site: usize, ops: OtocOperators) -> Result<CMat> {
    match ops {
        OtocOperators::Quadrature => {
            let c = annihilator(basis, site)?.to_dense();
            let cd = creator(basis, site)?.to_dense();
            Ok(c + cd)
        }
        OtocOperators::Number => Ok(crate::fock::site_number(basis, site)?.to_dense()),
    }
}

/// Level-spacing diagnostics of one Hamiltonian.
#[derive(Debug, Clone)]
pub struct LevelStats {
    /// Mean consecutive-gap ratio over the central half of the spectrum.
    pub r_mean: f64,
    /// Set when near-degenerate gaps were dropped.
    pub degeneracy_warning: bool,
    pub n_levels: usize,
}

/// Mean consecutive-gap ratio of a fixed-charge Hamiltonian.
pub fn level_spacing_r(h: &HamiltonianMatrix) -> Result<LevelStats> {
    if h.basis.sector() == Sector::FullSpace {
        return Err(CoreError::domain(
            "level statistics need a fixed-charge sector to avoid charge degeneracies",
        ));
    }
    let (evals, _) = hermitian_eig(&h.matrix)?;
    Ok(level_spacing_from_sorted(evals.as_slice().unwrap()))
}

/// Gap-ratio statistic r = mean(min(s_n, s_n+1) / max(s_n, s_n+1)) over the
/// central 50% of an ascending spectrum.
pub fn level_spacing_from_sorted(evals: &[f64]) -> LevelStats {
    let d = evals.len();
    let lo = d / 4;
    let hi = (3 * d) / 4;
    let central = &evals[lo..hi];
    let scale = (evals[d - 1] - evals[0]).abs().max(f64::MIN_POSITIVE);
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut dropped = 0usize;
    for w in central.windows(3) {
        let s1 = w[1] - w[0];
        let s2 = w[2] - w[1];
        if s1 <= 1e-12 * scale || s2 <= 1e-12 * scale {
            dropped += 1;
            continue;
        }
        sum += s1.min(s2) / s1.max(s2);
        count += 1;
    }
    LevelStats {
        r_mean: if count > 0 { sum / count as f64 } else { 0.0 },
        degeneracy_warning: dropped > 0,
        n_levels: central.len(),
    }
}

/// Pointwise mean and standard error over seeded realizations.
///
/// The generator receives the realization index and must derive its own
/// stream from it, so evaluation order (and the parallelism degree) cannot
/// change the result; the reduction runs in index order.
pub fn disorder_average<F>(n_realizations: usize, generator: F) -> Result<TimeSeries>
where
    F: Fn(usize) -> Result<TimeSeries> + Sync,
{
    if n_realizations < 2 {
        return Err(CoreError::domain("need at least 2 realizations"));
    }
    let mut series: Vec<(usize, TimeSeries)> = (0..n_realizations)
        .into_par_iter()
        .map(|idx| generator(idx).map(|s| (idx, s)))
        .collect::<Result<Vec<_>>>()?;
    series.sort_by_key(|(idx, _)| *idx);

    let first = &series[0].1;
    let times = first.times.clone();
    let npts = times.len();
    for (_, s) in &series {
        if s.times != times {
            return Err(CoreError::domain(
                "all realizations must share one time grid",
            ));
        }
    }
    let n = n_realizations as f64;
    let mut mean = vec![0.0; npts];
    for (_, s) in &series {
        for (m, v) in mean.iter_mut().zip(&s.values) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; npts];
    for (_, s) in &series {
        for (i, v) in s.values.iter().enumerate() {
            var[i] += (v - mean[i]) * (v - mean[i]);
        }
    }
    let stderr: Vec<f64> = var
        .iter()
        .map(|&s2| (s2 / (n - 1.0) / n).sqrt())
        .collect();

    let mut meta = first.meta.clone();
    meta.n_realizations = n_realizations;
    let mut out = TimeSeries::new(times, mean, meta)?;
    out.stderr = Some(stderr);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_dense_gaussian;
    use crate::fock::FockBasis;
    use crate::hamiltonian::build_hamiltonian;
    use crate::linalg::expm_i_hermitian;
    use crate::rng::stream;
    use crate::stats;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::sync::Arc;

    fn syk_hamiltonian(n: usize, sector: Sector, seed: u64) -> HamiltonianMatrix {
        let basis = Arc::new(FockBasis::build(n, sector).unwrap());
        let mut rng = stream(seed, 0);
        let t = sample_dense_gaussian(n, 1.0, &mut rng).unwrap();
        build_hamiltonian(&basis, &t, None).unwrap()
    }

    #[test]
    fn sff_starts_at_one() {
        let h = syk_hamiltonian(6, Sector::FixedCharge(3), 1);
        let s = sff_exact(&h, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.values[0], 1.0);
        assert!(s.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn sff_phases_match_explicit_trace() {
        let h = syk_hamiltonian(6, Sector::FixedCharge(3), 2);
        let times = [0.5, 1.5, 4.0];
        let s = sff_exact(&h, &times).unwrap();
        let d = h.dimension() as f64;
        for (&t, &v) in times.iter().zip(&s.values) {
            let u = expm_i_hermitian(&h.matrix, t).unwrap();
            let tr: Complex64 = (0..h.dimension()).map(|i| u[[i, i]]).sum();
            let direct = tr.norm_sqr() / (d * d);
            assert!((direct - v).abs() < 1e-10, "t={t}: {direct} vs {v}");
        }
    }

    #[test]
    fn schedule_sff_needs_stroboscopic_times() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (layers, _) = crate::hamiltonian::build_layers(&basis, 1.0, 2, 3).unwrap();
        let schedule = CircuitSchedule::new(
            layers.into_iter().map(|l| l.hamiltonian).collect(),
            0.1,
            1,
        )
        .unwrap();
        assert!(sff_schedule(&schedule, &[0.1, 0.25]).is_err());
        let ok = sff_schedule(&schedule, &[0.1, 0.2, 1.0]).unwrap();
        assert_eq!(ok.values.len(), 3);
    }

    #[test]
    fn schedule_sff_tracks_exact_at_small_dt() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (layers, h_sim) = crate::hamiltonian::build_layers(&basis, 1.0, 3, 4).unwrap();
        let dt = 0.01;
        let times: Vec<f64> = (1..=20).map(|n| n as f64 * dt * 10.0).collect();
        let schedule = CircuitSchedule::new(
            layers.into_iter().map(|l| l.hamiltonian).collect(),
            dt,
            1,
        )
        .unwrap();
        let trot = sff_schedule(&schedule, &times).unwrap();
        let exact = sff_exact(&h_sim, &times).unwrap();
        for ((&a, &b), &t) in trot.values.iter().zip(&exact.values).zip(&times) {
            assert!((a - b).abs() < 5e-3, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn log_grid_is_stroboscopic_and_increasing() {
        let dt = 0.05;
        let times = stroboscopic_log_times(dt, 1, 10_000, 40);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        for &t in &times {
            assert!(stroboscopic_index(t, dt).is_ok());
        }
    }

    #[test]
    fn otoc_initial_value_is_minus_one() {
        // Anticommuting Hermitian unitaries: F(0) = -1 regardless of H.
        let h = syk_hamiltonian(4, Sector::FullSpace, 5);
        let pair = otoc(&h, 0, 2, &[0.0, 0.3]).unwrap();
        assert!((pair.f.values[0] + 1.0).abs() < 1e-12);
        assert_eq!(pair.c.values[0], 0.0);
    }

    #[test]
    fn otoc_constant_without_dynamics() {
        let basis = Arc::new(FockBasis::build(3, Sector::FullSpace).unwrap());
        let h = HamiltonianMatrix {
            basis: Arc::clone(&basis),
            matrix: CMat::zeros((basis.dimension(), basis.dimension())),
            provenance: Default::default(),
        };
        let pair = otoc(&h, 0, 1, &[0.0, 1.0, 5.0]).unwrap();
        for &v in &pair.f.values {
            assert!((v - pair.f.values[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn otoc_is_real_and_scrambles() {
        let h = syk_hamiltonian(6, Sector::FullSpace, 6);
        let times: Vec<f64> = (0..=12).map(|i| i as f64 * 0.5).collect();
        let pair = otoc(&h, 0, 3, &times).unwrap();
        // |F| decays from 1 toward ~0 within a few 1/J.
        assert!((pair.f.values[0] + 1.0).abs() < 1e-12);
        let late = pair.f.values.last().unwrap().abs();
        assert!(late < 0.45, "late-time |F| = {late}");
    }

    #[test]
    fn quadrature_sector_guard() {
        let h = syk_hamiltonian(4, Sector::FixedCharge(2), 7);
        assert!(otoc(&h, 0, 1, &[0.0]).is_err());
        // Number-operator OTOCs are charge conserving and sector friendly.
        let pair = otoc_with(&h, 0, 1, &[0.0, 1.0], OtocOperators::Number).unwrap();
        assert_eq!(pair.f.values.len(), 2);
    }

    #[test]
    fn gap_ratio_affine_invariance() {
        let mut rng = stream(8, 0);
        let mut evals: Vec<f64> = (0..400).map(|_| rng.gen::<f64>() * 10.0).collect();
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let base = level_spacing_from_sorted(&evals);
        let shifted: Vec<f64> = evals.iter().map(|e| 3.0 * e - 7.0).collect();
        let again = level_spacing_from_sorted(&shifted);
        assert!((base.r_mean - again.r_mean).abs() < 1e-12 * base.r_mean);
    }

    #[test]
    fn gap_ratio_poisson_oracle() {
        // Independent uniform levels: r = 2 ln 2 - 1 = 0.3863.
        let mut rng = stream(9, 0);
        let mut acc = Vec::new();
        for _ in 0..40 {
            let mut evals: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
            evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            acc.push(level_spacing_from_sorted(&evals).r_mean);
        }
        let r = stats::mean(&acc);
        assert!((r - 0.386_294).abs() < 0.386_294 * 0.02, "Poisson r = {r}");
    }

    #[test]
    fn gap_ratio_gue_oracle() {
        // GUE random matrices: r ~ 0.5996 (finite-size values sit near 0.602).
        let mut rng = stream(10, 1);
        let d = 500;
        let mut acc = Vec::new();
        for _ in 0..16 {
            let mut m = CMat::zeros((d, d));
            for i in 0..d {
                let x: f64 = rng.sample(StandardNormal);
                m[[i, i]] = Complex64::new(x * 2f64.sqrt(), 0.0);
                for j in (i + 1)..d {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    m[[i, j]] = Complex64::new(re, im);
                    m[[j, i]] = Complex64::new(re, -im);
                }
            }
            let (evals, _) = hermitian_eig(&m).unwrap();
            acc.push(level_spacing_from_sorted(evals.as_slice().unwrap()).r_mean);
        }
        let r = stats::mean(&acc);
        assert!((r - 0.5996).abs() < 0.5996 * 0.02, "GUE r = {r}");
    }

    #[test]
    fn full_space_levels_rejected() {
        let h = syk_hamiltonian(5, Sector::FullSpace, 11);
        assert!(level_spacing_r(&h).is_err());
    }

    #[test]
    fn disorder_average_basics() {
        let make = |vals: Vec<f64>| {
            TimeSeries::new(
                vec![0.0, 1.0],
                vals,
                SeriesMeta {
                    observable: "test".into(),
                    ..Default::default()
                },
            )
        };
        let avg = disorder_average(2, |idx| make(vec![idx as f64 * 2.0, 5.0])).unwrap();
        assert_eq!(avg.values, vec![1.0, 5.0]);
        let se = avg.stderr.unwrap();
        assert_eq!(se[0], 1.0);
        assert_eq!(se[1], 0.0);
    }

    #[test]
    fn disorder_average_clt_scaling() {
        let gen = |idx: usize| {
            let mut rng = stream(77, idx as u64);
            let v: f64 = rng.gen::<f64>() - 0.5;
            TimeSeries::new(
                vec![0.0],
                vec![v],
                SeriesMeta::default(),
            )
        };
        let se10 = disorder_average(10, gen).unwrap().stderr.unwrap()[0];
        let se160 = disorder_average(160, gen).unwrap().stderr.unwrap()[0];
        let ratio = se10 / se160;
        assert!(
            (ratio - 4.0).abs() < 2.0,
            "stderr should shrink ~1/sqrt(n): ratio {ratio}"
        );
    }

    #[test]
    fn disorder_average_deterministic_under_parallelism() {
        let gen = |idx: usize| {
            let mut rng = stream(78, idx as u64);
            TimeSeries::new(vec![0.0, 1.0], vec![rng.gen(), rng.gen()], SeriesMeta::default())
        };
        let a = disorder_average(32, gen).unwrap();
        let b = disorder_average(32, gen).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn csv_format() {
        let mut s = TimeSeries::new(
            vec![0.0, 1.0],
            vec![1.0, 0.5],
            SeriesMeta {
                n_realizations: 4,
                ..Default::default()
            },
        )
        .unwrap();
        s.stderr = Some(vec![0.0, 0.25]);
        let csv = s.to_csv();
        assert!(csv.starts_with("t,mean,stderr,n_realizations\n"));
        assert!(csv.contains("1.000000000000e+00,5.000000000000e-01,2.500000000000e-01,4"));
    }
}
