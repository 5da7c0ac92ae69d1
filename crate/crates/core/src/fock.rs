//! Fermionic many-body bases and the operator matrices built on them.
//!
//! States are occupation bitstrings with site 0 at the least significant
//! bit. Annihilators follow the Jordan-Wigner convention
//! `c_i = (prod_{m<i} Z_m) sigma^-_i`, so acting with `c_i` on a state picks
//! up `(-1)^(number of occupied sites below i)`.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::linalg::CMat;

/// Default cap on the number of sites. Dense exponentials above this are
/// impractical at desk scale.
pub const DEFAULT_SITE_CAP: usize = 16;

/// Which charge sector the basis spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    /// All 2^N occupation states.
    FullSpace,
    /// States with exactly Q occupied sites.
    FixedCharge(usize),
}

/// Enumerated fermionic basis with an exact state <-> index map.
#[derive(Debug, Clone)]
pub struct FockBasis {
    n_sites: usize,
    sector: Sector,
    states: Vec<u64>,
}

impl FockBasis {
    /// Enumerate the basis for `n_sites` and `sector` under the default cap.
    pub fn build(n_sites: usize, sector: Sector) -> Result<Self> {
        Self::build_with_cap(n_sites, sector, DEFAULT_SITE_CAP)
    }

    /// Enumerate with an explicit site cap.
    pub fn build_with_cap(n_sites: usize, sector: Sector, cap: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(CoreError::domain("n_sites must be at least 1"));
        }
        if n_sites > cap {
            return Err(CoreError::capacity(format!(
                "n_sites = {n_sites} exceeds the cap of {cap}"
            )));
        }
        let states: Vec<u64> = match sector {
            Sector::FullSpace => (0..(1u64 << n_sites)).collect(),
            Sector::FixedCharge(q) => {
                if q > n_sites {
                    return Err(CoreError::domain(format!(
                        "charge Q = {q} outside 0..={n_sites}"
                    )));
                }
                (0..(1u64 << n_sites))
                    .filter(|s| s.count_ones() as usize == q)
                    .collect()
            }
        };
        Ok(FockBasis {
            n_sites,
            sector,
            states,
        })
    }

    /// Half-filling sector, the default arena for dynamics.
    pub fn half_filling(n_sites: usize) -> Result<Self> {
        Self::build(n_sites, Sector::FixedCharge(n_sites / 2))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u64 {
        self.states[index]
    }

    /// Index of a bitstring; exact inverse of `state`. States are stored in
    /// ascending order so this is a binary search.
    pub fn index_of(&self, state: u64) -> Option<usize> {
        match self.sector {
            Sector::FullSpace => {
                let idx = state as usize;
                (idx < self.states.len()).then_some(idx)
            }
            Sector::FixedCharge(_) => self.states.binary_search(&state).ok(),
        }
    }
}

/// Sparse complex operator between two bases (square when `rows == cols`).
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl OperatorMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        OperatorMatrix {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn push(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.rows && col < self.cols);
        if value != Complex64::new(0.0, 0.0) {
            self.entries.push((row, col, value));
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = Array2::zeros((self.rows, self.cols));
        for &(r, c, v) in &self.entries {
            m[[r, c]] += v;
        }
        m
    }

    /// Accumulate `coeff * self` into a dense matrix.
    pub fn scaled_add_to(&self, target: &mut CMat, coeff: Complex64) {
        for &(r, c, v) in &self.entries {
            target[[r, c]] += coeff * v;
        }
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            rows: self.cols,
            cols: self.rows,
            entries: self
                .entries
                .iter()
                .map(|&(r, c, v)| (c, r, v.conj()))
                .collect(),
        }
    }

    /// Max-abs deviation from Hermiticity (square matrices only).
    pub fn hermiticity_deviation(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        crate::linalg::hermiticity_deviation(&self.to_dense())
    }
}

/// Jordan-Wigner sign for acting below `site`: (-1)^(occupied sites < site).
#[inline]
fn jw_sign(state: u64, site: usize) -> f64 {
    let below = state & ((1u64 << site) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Apply `c_site` to a bitstring: None if the site is empty.
#[inline]
pub fn annihilate(state: u64, site: usize) -> Option<(u64, f64)> {
    if state & (1u64 << site) == 0 {
        None
    } else {
        Some((state & !(1u64 << site), jw_sign(state, site)))
    }
}

/// Apply `c^dag_site` to a bitstring: None if the site is occupied.
#[inline]
pub fn create(state: u64, site: usize) -> Option<(u64, f64)> {
    if state & (1u64 << site) != 0 {
        None
    } else {
        Some((state | (1u64 << site), jw_sign(state, site)))
    }
}

/// Matrix of `c_site` on the given basis.
///
/// Square on the full space. In a fixed-charge sector the operator maps
/// charge Q to Q-1, so the returned matrix is the rectangular block whose
/// rows live in the Q-1 basis (built internally).
pub fn annihilator(basis: &FockBasis, site: usize) -> Result<OperatorMatrix> {
    check_site(basis, site)?;
    let target = lowered_basis(basis)?;
    let mut op = OperatorMatrix::new(target.dimension(), basis.dimension());
    for (col, &s) in basis.states().iter().enumerate() {
        if let Some((s2, sign)) = annihilate(s, site) {
            if let Some(row) = target.index_of(s2) {
                op.push(row, col, Complex64::new(sign, 0.0));
            }
        }
    }
    Ok(op)
}

/// Matrix of `c^dag_site`; the adjoint block of [`annihilator`].
pub fn creator(basis: &FockBasis, site: usize) -> Result<OperatorMatrix> {
    check_site(basis, site)?;
    let target = raised_basis(basis)?;
    let mut op = OperatorMatrix::new(target.dimension(), basis.dimension());
    for (col, &s) in basis.states().iter().enumerate() {
        if let Some((s2, sign)) = create(s, site) {
            if let Some(row) = target.index_of(s2) {
                op.push(row, col, Complex64::new(sign, 0.0));
            }
        }
    }
    Ok(op)
}

/// Charge-conserving quadratic term `c^dag_i c_l` (square in any basis).
pub fn quadratic_term(basis: &FockBasis, i: usize, l: usize) -> Result<OperatorMatrix> {
    check_site(basis, i)?;
    check_site(basis, l)?;
    let mut op = OperatorMatrix::new(basis.dimension(), basis.dimension());
    for (col, &s) in basis.states().iter().enumerate() {
        let Some((s1, sign1)) = annihilate(s, l) else {
            continue;
        };
        let Some((s2, sign2)) = create(s1, i) else {
            continue;
        };
        let row = basis
            .index_of(s2)
            .expect("quadratic term conserves charge");
        op.push(row, col, Complex64::new(sign1 * sign2, 0.0));
    }
    Ok(op)
}

/// Charge-conserving two-body term `c^dag_i c^dag_j c_k c_l`.
///
/// Equal creation or annihilation indices give the zero matrix (Pauli
/// exclusion). Equals the product of the four Jordan-Wigner matrices.
pub fn two_body_term(
    basis: &FockBasis,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<OperatorMatrix> {
    for s in [i, j, k, l] {
        check_site(basis, s)?;
    }
    let mut op = OperatorMatrix::new(basis.dimension(), basis.dimension());
    if i == j || k == l {
        return Ok(op);
    }
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
        let row = basis.index_of(s4).expect("two-body term conserves charge");
        op.push(row, col, Complex64::new(g1 * g2 * g3 * g4, 0.0));
    }
    Ok(op)
}

/// Total number operator (diagonal).
pub fn number_operator(basis: &FockBasis) -> OperatorMatrix {
    let mut op = OperatorMatrix::new(basis.dimension(), basis.dimension());
    for (idx, &s) in basis.states().iter().enumerate() {
        op.push(idx, idx, Complex64::new(s.count_ones() as f64, 0.0));
    }
    op
}

/// Occupation of a single site (diagonal).
pub fn site_number(basis: &FockBasis, site: usize) -> Result<OperatorMatrix> {
    check_site(basis, site)?;
    let mut op = OperatorMatrix::new(basis.dimension(), basis.dimension());
    for (idx, &s) in basis.states().iter().enumerate() {
        if s & (1u64 << site) != 0 {
            op.push(idx, idx, Complex64::new(1.0, 0.0));
        }
    }
    Ok(op)
}

/// Shared handle used by Hamiltonians and unitaries.
pub type BasisRef = Arc<FockBasis>;

fn check_site(basis: &FockBasis, site: usize) -> Result<()> {
    if site >= basis.n_sites() {
        return Err(CoreError::domain(format!(
            "site {site} out of range for N = {}",
            basis.n_sites()
        )));
    }
    Ok(())
}

fn lowered_basis(basis: &FockBasis) -> Result<FockBasis> {
    match basis.sector() {
        Sector::FullSpace => Ok(basis.clone()),
        Sector::FixedCharge(q) => {
            if q == 0 {
                // c maps the vacuum sector to the empty space; represent as
                // a 0-row block.
                Ok(FockBasis {
                    n_sites: basis.n_sites(),
                    sector: Sector::FixedCharge(0),
                    states: Vec::new(),
                })
            } else {
                FockBasis::build(basis.n_sites(), Sector::FixedCharge(q - 1))
            }
        }
    }
}

fn raised_basis(basis: &FockBasis) -> Result<FockBasis> {
    match basis.sector() {
        Sector::FullSpace => Ok(basis.clone()),
        Sector::FixedCharge(q) => {
            if q == basis.n_sites() {
                Ok(FockBasis {
                    n_sites: basis.n_sites(),
                    sector: Sector::FixedCharge(q),
                    states: Vec::new(),
                })
            } else {
                FockBasis::build(basis.n_sites(), Sector::FixedCharge(q + 1))
            }
        }
    }
}
