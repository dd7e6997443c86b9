//! Thomas algorithm for tridiagonal systems.
//!
//! Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`;
//! `lower[0]` and `upper[n-1]` are ignored.

use crate::error::{Error, Result};

/// Solves the system in place, overwriting `rhs` with the solution.
///
/// Fails only if a pivot vanishes or the result is not finite, which cannot
/// happen for strictly diagonally dominant matrices.
pub fn solve_in_place(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    if lower.len() != n || diag.len() != n || upper.len() != n {
        return Err(Error::Internal("tridiagonal band length mismatch".into()));
    }
    if n == 0 {
        return Ok(());
    }
    let mut c_prime = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::Internal("zero pivot at row 0".into()));
    }
    c_prime[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c_prime[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Internal(format!("degenerate pivot at row {i}")));
        }
        c_prime[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
    if let Some(i) = rhs.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    Ok(())
}

/// Computes `A x` for the banded matrix.
pub fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut acc = diag[i] * x[i];
            if i > 0 {
                acc += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += upper[i] * x[i + 1];
            }
            acc
        })
        .collect()
}
