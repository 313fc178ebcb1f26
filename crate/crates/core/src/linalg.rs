//! Small dense symmetric solves and spectral norms.
//!
//! Systems here are at most a few hundred unknowns (one per feature), so
//! everything is backed by nalgebra's Cholesky and LU.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solve `A x = b` for symmetric `A`.
///
/// Tries Cholesky first and falls back to LU with full pivoting when `A`
/// is not numerically positive definite.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let lu = a.clone().full_piv_lu();
    if !lu.is_invertible() {
        return Err(Error::Singular(format!(
            "{}x{} system is not invertible",
            a.nrows(),
            a.ncols()
        )));
    }
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("pivoted solve produced non-finite values".into()))
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))
}

/// Largest singular value of `m` by power iteration on `mᵀm`.
///
/// Stops when the Rayleigh quotient changes by less than `rel_tol`
/// relatively, or after `max_iter` iterations.
pub fn spectral_norm(m: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mtm = m.transpose() * m;
    // Deterministic start with components along every axis.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0_f64;
    for _ in 0..max_iter {
        let w = &mtm * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_matches_svd() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -3.0, 0.5, 4.0, 1.0]);
        let svd = m.clone().svd(false, false);
        let expected = svd.singular_values.max();
        let got = spectral_norm(&m, 1e-14, 10_000);
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn cholesky_failure_falls_back_to_lu() {
        // Symmetric but indefinite.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![2.0, 3.0]);
        let x = solve_symmetric(&a, &b).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_system_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(solve_symmetric(&a, &b), Err(Error::Singular(_))));
    }
}
