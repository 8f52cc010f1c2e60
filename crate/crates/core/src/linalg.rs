//! Thin helpers over `nalgebra` dense complex matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

/// Cholesky factorization that rejects indefinite input. The complex square
/// root never fails, so the factor's diagonal is checked explicitly.
pub fn hpd_cholesky(m: &CMat) -> Result<Cholesky<Complex64, Dyn>> {
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.im.abs() <= 1e-12 * d.re
    });
    if ok {
        Ok(chol)
    } else {
        Err(Error::NotPositiveDefinite)
    }
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn hpd_inverse(m: &CMat) -> Result<CMat> {
    Ok(hpd_cholesky(m)?.inverse())
}

/// `m^{-1} rhs` for Hermitian positive-definite `m`.
pub fn hpd_solve(m: &CMat, rhs: &CMat) -> Result<CMat> {
    Ok(hpd_cholesky(m)?.solve(rhs))
}

/// Real part of the trace.
pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Squared Frobenius norm, `tr(A A^H)`.
pub fn fro_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `tr(A M A^H)` without forming the full product.
pub fn sandwich_trace(a: &CMat, m: &CMat) -> f64 {
    let am = a * m;
    am.iter().zip(a.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

/// `diag(d) m diag(d)` for a real diagonal `d`.
pub fn scale_both(m: &CMat, d: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (d[i] * d[j]))
}

/// `m diag(d)` for a real diagonal `d`.
pub fn scale_cols(m: &CMat, d: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[j])
}

/// Real matrix lifted to complex.
pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Largest deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hpd_inverse_identity() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let inv = hpd_inverse(&m).unwrap();
        let id = &m * &inv;
        assert!((id - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn sandwich_matches_explicit() {
        let a = CMat::from_row_slice(1, 2, &[c(1.0, 2.0), c(-0.5, 0.3)]);
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.1, 0.4), c(0.1, -0.4), c(1.0, 0.0)]);
        let explicit = trace_re(&(&a * &m * a.adjoint()));
        assert!((sandwich_trace(&a, &m) - explicit).abs() < 1e-12);
    }

    #[test]
    fn not_pd_rejected() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(hpd_inverse(&m).unwrap_err(), Error::NotPositiveDefinite);
    }
}
