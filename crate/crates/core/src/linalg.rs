//! Small dense linear-algebra helpers shared by the filters.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Lower-triangular `L` with `L Lᵀ = P`.
///
/// On failure the factorization is retried once with
/// `1e-12 · trace(P) / d · I` added to the diagonal.
pub fn sqrt_factor(p: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let d = p.nrows();
    if let Some(ch) = p.clone().cholesky() {
        return Ok(ch.l());
    }
    let jitter = 1e-12 * p.trace().abs() / d as f64;
    if jitter == 0.0 {
        // An all-zero matrix factors to zero.
        if p.iter().all(|v| *v == 0.0) {
            return Ok(DMatrix::zeros(d, d));
        }
        return Err(Error::NotPsd { context });
    }
    let mut shifted = p.clone();
    for i in 0..d {
        shifted[(i, i)] += jitter;
    }
    shifted
        .cholesky()
        .map(|ch| ch.l())
        .ok_or(Error::NotPsd { context })
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(p: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    p.clone()
        .cholesky()
        .map(|ch| symmetrized(ch.inverse()))
        .ok_or(Error::NotPsd { context })
}

/// `(P + Pᵀ) / 2`.
pub fn symmetrized(p: DMatrix<f64>) -> DMatrix<f64> {
    let t = p.transpose();
    (p + t) * 0.5
}

/// `log det P` for SPD `P`.
pub fn spd_log_det(p: &DMatrix<f64>, context: &'static str) -> Result<f64> {
    let ch = p.clone().cholesky().ok_or(Error::NotPsd { context })?;
    Ok(2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_has_zero_root() {
        let l = sqrt_factor(&DMatrix::zeros(4, 4), "test").unwrap();
        assert_eq!(l, DMatrix::zeros(4, 4));
    }

    #[test]
    fn jitter_rescues_roundoff_singular() {
        // Rank-one PSD matrix: plain Cholesky fails on the zero pivot.
        let v = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let p = &v * v.transpose();
        let l = sqrt_factor(&p, "test").unwrap();
        assert!((&l * l.transpose() - &p).norm() < 1e-9);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let p = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[1.0, -1.0]));
        assert!(matches!(sqrt_factor(&p, "test"), Err(Error::NotPsd { .. })));
    }
}
