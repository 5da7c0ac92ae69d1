//! Layer unitaries, cycled products, and convergence metrics for the
//! Trotterized evolution.
//!
//! One cycle applies every layer once for a step `dt`; by the BCH formula
//! the product approximates evolution under the summed Hamiltonian for a
//! simulated time `dt`, so `n` cycles land at `t_n = n * dt`.
//!
//! All operator distances use the Frobenius norm divided by sqrt(D), which
//! makes unitaries unit-norm and keeps distances in [0, 2] independent of
//! the basis size.

use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64;
use rand::seq::SliceRandom;

use crate::error::{CoreError, Result};
use crate::fock::BasisRef;
use crate::hamiltonian::HamiltonianMatrix;
use crate::linalg::{
    commutator, hermitian_eig, identity, normalized_frobenius, reconstruct_evolution,
    unitarity_deviation, CMat,
};
use crate::rng::stream;

/// How layers are ordered inside each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CycleOrder {
    /// Layer index ascending, identical in every cycle.
    #[default]
    Ascending,
    /// Independently reshuffled order per cycle (experimental variant).
    Shuffled { seed: u64 },
}

/// An ordered family of layer Hamiltonians with cycling parameters.
#[derive(Debug, Clone)]
pub struct CircuitSchedule {
    pub layers: Vec<HamiltonianMatrix>,
    pub dt: f64,
    pub n_cycles: usize,
    pub order: CycleOrder,
}

impl CircuitSchedule {
    pub fn new(layers: Vec<HamiltonianMatrix>, dt: f64, n_cycles: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(CoreError::domain("schedule needs at least one layer"));
        }
        if dt <= 0.0 {
            return Err(CoreError::domain("dt must be positive"));
        }
        let d = layers[0].dimension();
        if layers.iter().any(|l| l.dimension() != d) {
            return Err(CoreError::domain("all layers must share one basis"));
        }
        Ok(CircuitSchedule {
            layers,
            dt,
            n_cycles,
            order: CycleOrder::Ascending,
        })
    }

    pub fn r_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn basis(&self) -> &BasisRef {
        &self.layers[0].basis
    }
}

/// Dense unitary on a fixed basis.
#[derive(Debug, Clone)]
pub struct UnitaryMatrix {
    pub basis: BasisRef,
    pub matrix: CMat,
}

impl UnitaryMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// Max-abs deviation of U^dag U from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }
}

/// `exp(-i H dt)` through the eigendecomposition of the layer Hamiltonian.
pub fn layer_unitary(h: &HamiltonianMatrix, dt: f64) -> Result<UnitaryMatrix> {
    let (evals, vecs) = hermitian_eig(&h.matrix)?;
    Ok(UnitaryMatrix {
        basis: Arc::clone(&h.basis),
        matrix: reconstruct_evolution(&evals, &vecs, dt),
    })
}

/// Exact evolution under a single Hamiltonian for time `t`.
pub fn exact_evolution(h: &HamiltonianMatrix, t: f64) -> Result<UnitaryMatrix> {
    layer_unitary(h, t)
}

/// Product of the layer unitaries over one cycle. Layer 1 acts first, so
/// the matrix is U_R ... U_2 U_1.
pub fn cycle_unitary(layers: &[HamiltonianMatrix], dt: f64) -> Result<UnitaryMatrix> {
    ordered_cycle_unitary(layers, dt, &(0..layers.len()).collect::<Vec<_>>())
}

fn ordered_cycle_unitary(
    layers: &[HamiltonianMatrix],
    dt: f64,
    order: &[usize],
) -> Result<UnitaryMatrix> {
    if layers.is_empty() {
        return Err(CoreError::domain("cycle needs at least one layer"));
    }
    let d = layers[0].dimension();
    let mut product = identity(d);
    for &alpha in order {
        let u = layer_unitary(&layers[alpha], dt)?;
        product = u.matrix.dot(&product);
    }
    Ok(UnitaryMatrix {
        basis: Arc::clone(&layers[0].basis),
        matrix: product,
    })
}

/// Full Trotter product: `n_cycles` repetitions of the layer cycle.
pub fn trotter_evolution(schedule: &CircuitSchedule) -> Result<UnitaryMatrix> {
    let d = schedule.layers[0].dimension();
    match schedule.order {
        CycleOrder::Ascending => {
            let cycle = cycle_unitary(&schedule.layers, schedule.dt)?;
            Ok(UnitaryMatrix {
                basis: Arc::clone(schedule.basis()),
                matrix: matrix_power(&cycle.matrix, schedule.n_cycles),
            })
        }
        CycleOrder::Shuffled { seed } => {
            let mut product = identity(d);
            for cycle_idx in 0..schedule.n_cycles {
                let mut order: Vec<usize> = (0..schedule.r_layers()).collect();
                let mut rng = stream(seed, cycle_idx as u64);
                order.shuffle(&mut rng);
                let cycle = ordered_cycle_unitary(&schedule.layers, schedule.dt, &order)?;
                product = cycle.matrix.dot(&product);
            }
            Ok(UnitaryMatrix {
                basis: Arc::clone(schedule.basis()),
                matrix: product,
            })
        }
    }
}

/// Binary exponentiation of a dense matrix.
fn matrix_power(m: &CMat, mut n: usize) -> CMat {
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = base.dot(&result);
        }
        n >>= 1;
        if n > 0 {
            base = base.dot(&base);
        }
    }
    result
}

/// Sum of pairwise commutators over layer pairs alpha < beta.
fn commutator_sum(layers: &[HamiltonianMatrix]) -> CMat {
    let d = layers[0].dimension();
    let mut sum = CMat::zeros((d, d));
    for a in 0..layers.len() {
        for b in (a + 1)..layers.len() {
            sum = sum + commutator(&layers[a].matrix, &layers[b].matrix);
        }
    }
    sum
}

/// Leading BCH error estimate for `n` cycles of step `dt`:
/// (t_n dt / 2) ||sum_{a<b} [H_a, H_b]|| with t_n = n dt.
pub fn bch_error_estimate(layers: &[HamiltonianMatrix], dt: f64, n: usize) -> f64 {
    if layers.len() < 2 {
        return 0.0;
    }
    let t_n = n as f64 * dt;
    t_n * dt / 2.0 * normalized_frobenius(&commutator_sum(layers))
}

/// Squared norm of the summed commutators, `|| sum_{a<b} [H_a, H_b] ||^2`.
pub fn commutator_norm_sq(layers: &[HamiltonianMatrix]) -> f64 {
    if layers.len() < 2 {
        return 0.0;
    }
    let norm = normalized_frobenius(&commutator_sum(layers));
    norm * norm
}

/// Time-averaged distance between the exact and the Trotterized evolution,
/// `(1/n_max) sum_n || U_sim(t_n) - (prod_a U_a)^n ||`, for one disorder
/// realization. The running Trotter product is reused across n, so the
/// cost is one matrix multiply per cycle.
pub fn delta_u(layers: &[HamiltonianMatrix], dt: f64, n_max: usize) -> Result<f64> {
    if n_max == 0 {
        return Err(CoreError::domain("n_max must be at least 1"));
    }
    if layers.is_empty() {
        return Err(CoreError::domain("delta_u needs at least one layer"));
    }
    let d = layers[0].dimension();
    let mut h_sim = CMat::zeros((d, d));
    for l in layers {
        h_sim = h_sim + &l.matrix;
    }
    let (evals, vecs) = hermitian_eig(&h_sim)?;
    let cycle = cycle_unitary(layers, dt)?;

    let mut product = identity(d);
    let mut acc = 0.0;
    for n in 1..=n_max {
        product = cycle.matrix.dot(&product);
        let exact = reconstruct_evolution(&evals, &vecs, n as f64 * dt);
        acc += normalized_frobenius(&(&exact - &product));
    }
    Ok(acc / n_max as f64)
}

/// Cycle count needed for accuracy `eps` at total time `t`:
/// ceil(M t^2 J^2 R / (N eps)).
pub fn trotter_steps_required(
    t: f64,
    j: f64,
    r: usize,
    n_sites: usize,
    eps: f64,
    m: f64,
) -> Result<u64> {
    if eps <= 0.0 {
        return Err(CoreError::domain("eps must be positive"));
    }
    let bound = m * t * t * j * j * r as f64 / (n_sites as f64 * eps);
    Ok(bound.ceil() as u64)
}

/// Eigenphases of a unitary matrix, normalized to unit modulus.
pub fn unitary_eigenphases(u: &UnitaryMatrix) -> Result<Array1<f64>> {
    let vals = crate::linalg::general_eigenvalues(&u.matrix)?;
    for v in vals.iter() {
        if (v.norm() - 1.0).abs() > 1e-8 {
            return Err(CoreError::numerical(format!(
                "eigenvalue modulus {:.3e} is not on the unit circle",
                v.norm()
            )));
        }
    }
    Ok(vals.mapv(|z| z.arg()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{number_operator, FockBasis, Sector};
    use crate::hamiltonian::{build_layers, Provenance};
    use crate::linalg::max_abs_diff;
    use crate::stats;
    use rand::Rng;

    fn diagonal_hamiltonian(basis: &BasisRef, seed: u64) -> HamiltonianMatrix {
        let d = basis.dimension();
        let mut rng = stream(seed, 0);
        let mut m = CMat::zeros((d, d));
        for i in 0..d {
            m[[i, i]] = Complex64::new(rng.gen::<f64>() - 0.5, 0.0);
        }
        HamiltonianMatrix {
            basis: Arc::clone(basis),
            matrix: m,
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (layers, _) = build_layers(&basis, 1.0, 1, 1).unwrap();
        let u = layer_unitary(&layers[0].hamiltonian, 0.0).unwrap();
        assert!(max_abs_diff(&u.matrix, &identity(u.dimension())) < 1e-13);
    }

    #[test]
    fn diagonal_hamiltonian_closed_form() {
        let basis = Arc::new(FockBasis::build(3, Sector::FullSpace).unwrap());
        let h = diagonal_hamiltonian(&basis, 4);
        let dt = 0.37;
        let u = layer_unitary(&h, dt).unwrap();
        for i in 0..u.dimension() {
            let expect = Complex64::from_polar(1.0, -h.matrix[[i, i]].re * dt);
            assert!((u.matrix[[i, i]] - expect).norm() < 1e-12);
        }
        assert!(u.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn evolution_group_property() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (_, h_sim) = build_layers(&basis, 1.0, 3, 5).unwrap();
        let u1 = exact_evolution(&h_sim, 0.4).unwrap();
        let u2 = exact_evolution(&h_sim, 0.6).unwrap();
        let u3 = exact_evolution(&h_sim, 1.0).unwrap();
        assert!(max_abs_diff(&u1.matrix.dot(&u2.matrix), &u3.matrix) < 1e-10);
    }

    #[test]
    fn single_layer_has_no_trotter_error() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (layers, h_sim) = build_layers(&basis, 1.0, 1, 7).unwrap();
        let schedule = CircuitSchedule::new(
            layers.iter().map(|l| l.hamiltonian.clone()).collect(),
            0.3,
            5,
        )
        .unwrap();
        let trot = trotter_evolution(&schedule).unwrap();
        let exact = exact_evolution(&h_sim, 1.5).unwrap();
        assert!(max_abs_diff(&trot.matrix, &exact.matrix) < 1e-10);
        assert!(bch_error_estimate(&schedule.layers, 0.3, 5) == 0.0);
        assert!(delta_u(&schedule.layers, 0.3, 5).unwrap() < 1e-9);
    }

    #[test]
    fn commuting_layers_terminate_bch() {
        let basis = Arc::new(FockBasis::build(4, Sector::FullSpace).unwrap());
        let hs: Vec<HamiltonianMatrix> =
            (0..3).map(|s| diagonal_hamiltonian(&basis, 10 + s)).collect();
        let dt = 0.21;
        let n = 4;
        let schedule = CircuitSchedule::new(hs.clone(), dt, n).unwrap();
        let trot = trotter_evolution(&schedule).unwrap();

        let mut sum = CMat::zeros(hs[0].matrix.dim());
        for h in &hs {
            sum = sum + &h.matrix;
        }
        let h_sum = HamiltonianMatrix {
            basis: Arc::clone(&basis),
            matrix: sum,
            provenance: Provenance::default(),
        };
        let exact = exact_evolution(&h_sum, dt * n as f64).unwrap();
        assert!(max_abs_diff(&trot.matrix, &exact.matrix) < 1e-10);
        assert!(bch_error_estimate(&hs, dt, n) < 1e-12);
    }

    #[test]
    fn bch_estimate_bounds_measured_error() {
        let basis = Arc::new(FockBasis::build(4, Sector::FixedCharge(2)).unwrap());
        let (layers, h_sim) = build_layers(&basis, 1.0, 2, 21).unwrap();
        let hs: Vec<HamiltonianMatrix> = layers.iter().map(|l| l.hamiltonian.clone()).collect();
        let dt = 0.01;
        let n = 10;
        let schedule = CircuitSchedule::new(hs.clone(), dt, n).unwrap();
        let trot = trotter_evolution(&schedule).unwrap();
        let exact = exact_evolution(&h_sim, dt * n as f64).unwrap();
        let measured = normalized_frobenius(&(&trot.matrix - &exact.matrix));
        let estimate = bch_error_estimate(&hs, dt, n);
        assert!(
            measured <= 3.0 * estimate,
            "measured {measured:.3e} vs estimate {estimate:.3e}"
        );
        assert!(
            estimate <= 50.0 * measured.max(1e-300),
            "estimate {estimate:.3e} wildly above measured {measured:.3e}"
        );
    }

    #[test]
    fn commutator_norm_scales_as_r_squared() {
        let basis = Arc::new(FockBasis::half_filling(8).unwrap());
        let r_values = [2usize, 4, 8, 16];
        let mut means = Vec::new();
        for (i, &r) in r_values.iter().enumerate() {
            let mut vals = Vec::new();
            for rep in 0..12 {
                let (layers, _) =
                    build_layers(&basis, 1.0, r, 9000 + (i * 100 + rep) as u64).unwrap();
                let hs: Vec<HamiltonianMatrix> =
                    layers.into_iter().map(|l| l.hamiltonian).collect();
                vals.push(commutator_norm_sq(&hs));
            }
            means.push(stats::mean(&vals));
        }
        let xs: Vec<f64> = r_values.iter().map(|&r| r as f64).collect();
        let (exponent, r2) = stats::power_law_exponent(&xs, &means);
        assert!(
            (exponent - 2.0).abs() < 0.4,
            "R-scaling exponent {exponent} (r2 = {r2})"
        );
    }

    #[test]
    fn delta_u_monotone_in_dt() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (layers, _) = build_layers(&basis, 1.0, 4, 31).unwrap();
        let hs: Vec<HamiltonianMatrix> = layers.into_iter().map(|l| l.hamiltonian).collect();
        let total_t: f64 = 2.0;
        let mut last = f64::INFINITY;
        for dt in [0.1, 0.05, 0.02, 0.01] {
            let n_max = (total_t / dt).round() as usize;
            let du = delta_u(&hs, dt, n_max).unwrap();
            assert!(du < last, "delta_u should decrease with dt: {du} vs {last}");
            last = du;
        }
    }

    #[test]
    fn trotter_product_conserves_charge() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (layers, _) = build_layers(&basis, 1.0, 3, 41).unwrap();
        let schedule = CircuitSchedule::new(
            layers.into_iter().map(|l| l.hamiltonian).collect(),
            0.05,
            7,
        )
        .unwrap();
        let u = trotter_evolution(&schedule).unwrap();
        assert!(u.unitarity_deviation() < 1e-10);
        let n_op = number_operator(&basis).to_dense();
        let comm = u.matrix.dot(&n_op) - n_op.dot(&u.matrix);
        assert!(comm.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn shuffled_cycles_remain_unitary() {
        let basis = Arc::new(FockBasis::half_filling(6).unwrap());
        let (layers, _) = build_layers(&basis, 1.0, 3, 51).unwrap();
        let mut schedule = CircuitSchedule::new(
            layers.into_iter().map(|l| l.hamiltonian).collect(),
            0.1,
            4,
        )
        .unwrap();
        schedule.order = CycleOrder::Shuffled { seed: 8 };
        let u = trotter_evolution(&schedule).unwrap();
        assert!(u.unitarity_deviation() < 1e-10);
    }

    #[test]
    fn step_bound_examples() {
        assert_eq!(trotter_steps_required(1.0, 1.0, 8, 8, 1.0, 1.0).unwrap(), 1);
        let n1 = trotter_steps_required(2.0, 1.0, 4, 8, 0.5, 1.0).unwrap();
        let n2 = trotter_steps_required(4.0, 1.0, 4, 8, 0.5, 1.0).unwrap();
        assert_eq!(n2, 4 * n1);
        assert_eq!(
            trotter_steps_required(10.0, 1.0, 8, 8, 0.1, 1.0).unwrap(),
            1000
        );
        assert!(trotter_steps_required(1.0, 1.0, 1, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn eigenphases_match_spectrum() {
        let basis = Arc::new(FockBasis::half_filling(4).unwrap());
        let (layers, h_sim) = build_layers(&basis, 1.0, 2, 61).unwrap();
        let dt = 0.05;
        let u = cycle_unitary(
            &layers
                .iter()
                .map(|l| l.hamiltonian.clone())
                .collect::<Vec<_>>(),
            dt,
        )
        .unwrap();
        let phases = unitary_eigenphases(&u).unwrap();
        assert_eq!(phases.len(), u.dimension());
        // For small dt the cycle phases approximate -E dt mod 2pi.
        let (evals, _) = hermitian_eig(&h_sim.matrix).unwrap();
        let mut expect: Vec<f64> = evals.iter().map(|e| -e * dt).collect();
        let mut got: Vec<f64> = phases.to_vec();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 5e-4, "phase {g} vs {e}");
        }
    }
}
