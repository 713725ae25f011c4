//! Dense reference decompositions used to cross-check the sparse paths on
//! small grids.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Largest dimension the dense oracle accepts.
pub const DENSE_LIMIT: usize = 1500;

pub fn to_dense(a: &CsrMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if a.n_rows() > DENSE_LIMIT || a.n_cols() > DENSE_LIMIT {
        return Err(Error::OracleUnavailable(format!(
            "dimension {} exceeds the dense limit {DENSE_LIMIT}",
            a.n_rows()
        )));
    }
    let mut m = DMatrix::zeros(a.n_rows(), a.n_cols());
    for (i, j, v) in a.triplets() {
        m[(i, j)] = v;
    }
    Ok(m)
}

/// All eigenvalues via a complex Schur decomposition.
pub fn eigenvalues(a: &CsrMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let m = to_dense(a)?;
    m.eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::OracleUnavailable("Schur iteration failed".into()))
}

/// Eigenvalue of `a` nearest to `target`.
pub fn nearest_eigenvalue(a: &CsrMatrix<Complex64>, target: Complex64) -> Result<Complex64> {
    let ev = eigenvalues(a)?;
    ev.into_iter()
        .min_by(|p, q| (p - target).norm().total_cmp(&(q - target).norm()))
        .ok_or_else(|| Error::OracleUnavailable("empty matrix".into()))
}

/// Singular values in ascending order.
pub fn singular_values(a: &CsrMatrix<Complex64>) -> Result<Vec<f64>> {
    let m = to_dense(a)?;
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_spectrum() {
        let a = CsrMatrix::diagonal(&[Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 3.0)]);
        let e = nearest_eigenvalue(&a, Complex64::new(-2.0, 2.9)).unwrap();
        assert!((e - Complex64::new(-2.0, 3.0)).norm() < 1e-14);
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14 && (s[1] - 13f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn refuses_large() {
        let a = CsrMatrix::<Complex64>::identity(DENSE_LIMIT + 1);
        assert!(matches!(eigenvalues(&a), Err(Error::OracleUnavailable(_))));
    }
}
