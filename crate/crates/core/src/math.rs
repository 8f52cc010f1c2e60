//! Scalar helpers shared by the analytical and oracle paths.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Taylor coefficients of `asin(x) - x`, odd powers 3, 5, ..., 21.
const ASIN_TAIL: [f64; 10] = asin_tail_coefficients();

/// The first `K` Taylor coefficients of `asin(x) - x`: entry `n - 1` multiplies
/// `x^(2n+1)`.
pub const fn asin_tail_coefficients<const K: usize>() -> [f64; K] {
    // c_n = (2n)! / (4^n (n!)^2 (2n + 1)) for the x^(2n+1) term of asin.
    let mut out = [0.0; K];
    let mut central = 1.0; // (2n)! / (4^n (n!)^2)
    let mut n = 1;
    while n <= K {
        central *= (2 * n - 1) as f64 / (2 * n) as f64;
        out[n - 1] = central / (2 * n + 1) as f64;
        n += 1;
    }
    out
}

/// Below this magnitude the series is used; the truncation error is under
/// 1e-19 relative to the result.
const SERIES_CUTOFF: f64 = 0.125;

/// `f(x) = asin(x) - x`, the nonlinear part of the arcsine law.
///
/// Accurate to full double precision relative to the result, including the
/// small-argument regime where the direct difference would cancel.
#[inline]
pub fn asin_minus_identity(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        let mut acc = ASIN_TAIL[9];
        let mut i = 9;
        while i > 0 {
            i -= 1;
            acc = acc * x2 + ASIN_TAIL[i];
        }
        acc * x2 * x
    } else {
        libm::asin(x) - x
    }
}

/// Clamp a normalized covariance to `[-1, 1]` when it overshoots by at most
/// `tol`. Larger excursions are returned as `Err(value)`.
#[inline]
pub fn clamp_unit(x: f64, tol: f64) -> core::result::Result<f64, f64> {
    if x > 1.0 {
        if x <= 1.0 + tol {
            Ok(1.0)
        } else {
            Err(x)
        }
    } else if x < -1.0 {
        if x >= -1.0 - tol {
            Ok(-1.0)
        } else {
            Err(x)
        }
    } else if x.is_nan() {
        Err(x)
    } else {
        Ok(x)
    }
}

/// `e^{-j 2 pi t / n}` for `t = 0..n`. Every phase used by the analysis is an
/// `n`-th root of unity, so indices are reduced modulo `n` exactly.
pub fn roots_of_unity(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|t| {
            let ang = -2.0 * PI * t as f64 / n as f64;
            Complex64::new(libm::cos(ang), libm::sin(ang))
        })
        .collect()
}

/// Neumaier-compensated running sum. Used wherever Monte-Carlo terms are
/// accumulated so totals do not depend on how many trials were run.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut s = CompensatedSum::new();
    s.extend(xs.iter().copied());
    let mean = s.total() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let mut v = CompensatedSum::new();
    v.extend(xs.iter().map(|x| (x - mean) * (x - mean)));
    let var = v.total() / (n - 1) as f64;
    (mean, libm::sqrt(var / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asin_tail_matches_direct_difference() {
        for &x in &[-0.9, -0.5, -0.124, -0.05, 0.0, 1e-6, 0.01, 0.1, 0.1249, 0.126, 0.7, 1.0] {
            let direct = libm::asin(x) - x;
            let got = asin_minus_identity(x);
            assert!(
                (got - direct).abs() <= 1e-15 * direct.abs().max(1e-300) + 1e-17,
                "x = {x}: {got} vs {direct}"
            );
        }
        assert!((asin_minus_identity(1.0) - (PI / 2.0 - 1.0)).abs() < 1e-15);
        // x^3/6 leading behaviour
        let x = 1e-4;
        assert!((asin_minus_identity(x) / (x * x * x / 6.0) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn clamp_guard() {
        assert_eq!(clamp_unit(1.0 + 1e-13, 1e-12), Ok(1.0));
        assert_eq!(clamp_unit(-1.0 - 1e-13, 1e-12), Ok(-1.0));
        assert!(clamp_unit(1.0 + 1e-9, 1e-12).is_err());
        assert!(clamp_unit(f64::NAN, 1e-12).is_err());
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.total(), 1000.0);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        let (m, se) = mean_and_stderr(&[2.0; 10]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }
}
