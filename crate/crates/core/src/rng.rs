//! Reproducible random-number streams.
//!
//! Every ensemble in this crate runs off one master seed. Realization `i`
//! draws from an independent ChaCha stream derived from `(master, i)`, so
//! results do not depend on evaluation order and parallel workers never
//! share state.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Seed = u64;

/// Independent stream for realization `index` of the ensemble rooted at
/// `master`. Streams with different indices never overlap.
pub fn stream(master: Seed, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Real Gaussian draw with mean zero and the given variance.
pub fn real_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> f64 {
    let g: f64 = rng.sample(StandardNormal);
    g * variance.sqrt()
}

/// Complex Gaussian draw with `E[|z|^2] = variance`, split equally between
/// real and imaginary parts.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
