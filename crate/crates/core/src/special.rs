//! Special functions: modified Bessel function of the second kind K0 and
//! the Kolmogorov distribution tail used by the KS tests.

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the first kind, I0.
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the second kind, K0.
///
/// Power series with the log term for x <= 8, asymptotic expansion beyond.
/// Relative accuracy is ~1e-7 or better over the whole positive axis.
/// Returns +inf at x = 0 (logarithmic divergence) and NaN for x < 0.
pub fn bessel_k0(x: f64) -> f64 {
    if x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    if x <= 8.0 {
        // K0 = -(ln(x/2) + gamma) I0(x) + sum_k (x^2/4)^k / (k!)^2 * H_k
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut harmonic = 0.0;
        let mut sum = 0.0;
        for k in 1..200 {
            term *= q / ((k * k) as f64);
            harmonic += 1.0 / k as f64;
            sum += term * harmonic;
            if term * harmonic < sum.abs() * 1e-18 + 1e-300 {
                break;
            }
        }
        -( (x / 2.0).ln() + EULER_GAMMA ) * bessel_i0(x) + sum
    } else {
        // K0(x) ~ sqrt(pi/2x) e^{-x} [1 - 1/8x + 9/(2!(8x)^2) - ...]
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let j = (2 * k - 1) as f64;
            term *= -(j * j) / (k as f64 * 8.0 * x);
            if term.abs() >= prev {
                break; // asymptotic series started diverging
            }
            sum += term;
            prev = term.abs();
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum
    }
}

/// Tail of the Kolmogorov distribution, Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from standard tables.
    const K0_TABLE: &[(f64, f64)] = &[
        (0.1, 2.427_069_024_702_017),
        (0.5, 0.924_419_071_227_666),
        (1.0, 0.421_024_438_240_708),
        (2.0, 0.113_893_872_749_533),
        (5.0, 3.691_098_334_042_594e-3),
        (10.0, 1.778_006_231_616_765e-5),
    ];

    #[test]
    fn k0_matches_tables() {
        for &(x, expect) in K0_TABLE {
            let got = bessel_k0(x);
            let rel = ((got - expect) / expect).abs();
            assert!(rel < 1e-7, "K0({x}) = {got:.12e}, expected {expect:.12e}");
        }
    }

    #[test]
    fn k0_edge_cases() {
        assert!(bessel_k0(0.0).is_infinite());
        assert!(bessel_k0(-1.0).is_nan());
        assert!(bessel_k0(700.0) >= 0.0);
    }

    #[test]
    fn i0_small_argument() {
        // I0(x) = 1 + x^2/4 + O(x^4)
        assert!((bessel_i0(1e-4) - 1.0 - 2.5e-9).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_known_points() {
        // Q(0.8276) ~ 0.5 (median), Q large -> 0, Q small -> 1.
        assert!((kolmogorov_tail(0.8275736) - 0.5).abs() < 1e-4);
        assert!(kolmogorov_tail(3.0) < 1e-6);
        assert!((kolmogorov_tail(0.05) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) + normal_cdf(-1.0) - 1.0).abs() < 1e-12);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-9);
    }
}
