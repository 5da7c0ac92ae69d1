//! Dense complex linear algebra helpers shared across modules.

use ndarray::prelude::*;
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

/// Max-abs deviation from Hermiticity.
pub fn hermiticity_deviation(a: &CMat) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Max-abs entry of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

/// Plain Frobenius norm.
pub fn frobenius_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius norm divided by sqrt(D), so unitaries have norm 1 and operator
/// distances stay O(1) independent of the basis size.
pub fn normalized_frobenius(a: &CMat) -> f64 {
    frobenius_norm(a) / (a.nrows() as f64).sqrt()
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// the unitary of column eigenvectors.
pub fn hermitian_eig(h: &CMat) -> Result<(Array1<f64>, CMat)> {
    let dev = hermiticity_deviation(h);
    if dev > 1e-10 {
        return Err(CoreError::numerical(format!(
            "matrix is not Hermitian (max deviation {dev:.3e})"
        )));
    }
    h.eigh(UPLO::Lower)
        .map_err(|e| CoreError::numerical(format!("eigh failed: {e}")))
}

/// Eigenvalues of a general complex matrix (zgeev).
pub fn general_eigenvalues(a: &CMat) -> Result<CVec> {
    let (vals, _) = a
        .eig()
        .map_err(|e| CoreError::numerical(format!("eig failed: {e}")))?;
    Ok(vals)
}

/// `exp(-i H t)` through the eigendecomposition of Hermitian `H`.
/// Exact to numerical precision, not a series truncation.
pub fn expm_i_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let (evals, vecs) = hermitian_eig(h)?;
    Ok(reconstruct_evolution(&evals, &vecs, t))
}

/// `V exp(-i E t) V^dag` from a precomputed eigendecomposition.
pub fn reconstruct_evolution(evals: &Array1<f64>, vecs: &CMat, t: f64) -> CMat {
    let d = evals.len();
    let mut scaled = vecs.clone();
    for (k, col) in scaled.columns_mut().into_iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -evals[k] * t);
        let mut col = col;
        col.map_inplace(|z| *z *= phase);
    }
    let vdag = vecs.t().mapv(|z| z.conj());
    let mut out = CMat::zeros((d, d));
    ndarray::linalg::general_mat_mul(
        Complex64::new(1.0, 0.0),
        &scaled,
        &vdag,
        Complex64::new(0.0, 0.0),
        &mut out,
    );
    out
}

/// Max-abs deviation of `U^dag U` from the identity.
pub fn unitarity_deviation(u: &CMat) -> f64 {
    let udag = u.t().mapv(|z| z.conj());
    let prod = udag.dot(u);
    let d = prod.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            dev = dev.max((prod[[i, j]] - target).norm());
        }
    }
    dev
}

/// Identity matrix shorthand.
pub fn identity(d: usize) -> CMat {
    CMat::eye(d)
}

/// Commutator `[a, b]`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}
