//! Numerics for simulating dense random-disorder fermion models out of
//! low-rank building blocks.
//!
//! The crate covers the full pipeline:
//!
//! * [`fock`] — fermionic many-body bases and Jordan-Wigner operators,
//! * [`disorder`] — Gaussian, low-rank and class-resolved coupling samplers,
//! * [`hamiltonian`] — dense Hamiltonian assembly and layer families,
//! * [`speckle`] — optical-speckle detuning fields and the rank-two
//!   couplings they induce on Hermite-Gauss trap modes,
//! * [`trotter`] — cycled layer unitaries and convergence metrics,
//! * [`observables`] — spectral form factor, OTOCs, level statistics,
//! * [`divergence`] — Bessel/convolved-Bessel densities and KL divergence,
//! * [`sdsolver`] — large-N Schwinger-Dyson equations with random-Lindblad
//!   dissipation at infinite temperature.
//!
//! All samplers take explicit seeded streams (see [`rng`]) so ensembles are
//! reproducible and order-independent under parallel evaluation.

// Force the BLAS/LAPACK backend link.
extern crate blas_src;
extern crate openblas_src;

pub mod disorder;
pub mod divergence;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod linalg;
pub mod observables;
pub mod report;
pub mod rng;
pub mod sdsolver;
pub mod special;
pub mod speckle;
pub mod stats;
pub mod trotter;

pub use error::{CoreError, Result};
