//! Standard normal distribution helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// 1/sqrt(2*pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF via `erfc`, accurate in both tails.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub(crate) fn sqrt_2pi() -> f64 {
    (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_centered() {
        assert_eq!(cdf(0.0), 0.5);
        for &x in &[0.1, 1.0, 2.5, 7.0] {
            assert!((cdf(x) + cdf(-x) - 1.0).abs() < 1e-15);
        }
        assert!((pdf(0.0) * sqrt_2pi() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lower_tail_keeps_relative_precision() {
        // N(-10) = 7.619853024160526e-24
        let v = cdf(-10.0);
        assert!((v / 7.619_853_024_160_526e-24 - 1.0).abs() < 1e-13);
    }
}
