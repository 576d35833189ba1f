//! The rotation group SO(3).
//!
//! Rotation vectors are mapped to the group with the Rodrigues formula.
//! Every coefficient function switches to its Taylor expansion once the
//! angle drops below [`SMALL_ANGLE`], where the trigonometric ratios lose
//! precision to cancellation.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Angle below which Taylor forms replace the trigonometric ratios.
pub const SMALL_ANGLE: f64 = 1e-7;

/// Margin on `trace(R) + 1` below which the log map is refused.
const LOG_CUT_MARGIN: f64 = 1e-6;

/// `φ ↦ φ^∧`, the skew-symmetric matrix with `hat(a) * b == a × b`.
pub fn hat(phi: &Vec3) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -phi.z, phi.y, //
        phi.z, 0.0, -phi.x, //
        -phi.y, phi.x, 0.0,
    )
}

/// Inverse of [`hat`]. Only the lower-triangular entries are read.
pub fn vee(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SO3(Matrix3<f64>);

impl SO3 {
    pub fn identity() -> Self {
        SO3(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthogonality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        SO3(m)
    }

    /// Projects an arbitrary nonsingular matrix onto the closest rotation
    /// (polar decomposition via SVD).
    pub fn from_matrix_projected(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u_fixed = u;
            u_fixed.column_mut(2).neg_mut();
            r = u_fixed * v_t;
        }
        SO3(r)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn exp(phi: &Vec3) -> Self {
        let theta2 = phi.norm_squared();
        let theta = theta2.sqrt();
        let k = hat(phi);
        let (a, b) = if theta < SMALL_ANGLE {
            (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
        } else {
            (theta.sin() / theta, half_versine(theta) / theta2)
        };
        SO3(Matrix3::identity() + k * a + k * k * b)
    }

    /// Rotation vector with angle in `[0, π)`.
    pub fn log(&self) -> Result<Vec3> {
        let r = &self.0;
        let trace = r.trace();
        if trace <= -1.0 + LOG_CUT_MARGIN {
            return Err(Error::AngleNearPi { trace });
        }
        let w = vee(&(r - r.transpose())) * 0.5;
        let s = w.norm();
        let c = 0.5 * (trace - 1.0);
        let theta = s.atan2(c);
        if theta < SMALL_ANGLE {
            Ok(w * (1.0 + theta * theta / 6.0))
        } else {
            Ok(w * (theta / s))
        }
    }

    pub fn inverse(&self) -> Self {
        SO3(self.0.transpose())
    }

    pub fn compose(&self, other: &SO3) -> Self {
        SO3(self.0 * other.0)
    }

    pub fn act(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `‖R Rᵀ − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0 * self.0.transpose() - Matrix3::identity()).norm()
    }
}

/// Left Jacobian of SO(3).
pub fn left_jacobian(phi: &Vec3) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(phi);
    let (a, b) = if theta < SMALL_ANGLE {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        (
            half_versine(theta) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Closed-form inverse of [`left_jacobian`].
pub fn left_jacobian_inv(phi: &Vec3) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(phi);
    let b = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - k * 0.5 + k * k * b
}

/// `1 − cos θ` without cancellation.
fn half_versine(theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    2.0 * s * s
}

/// `J_r(φ) = J_l(−φ)`.
pub fn right_jacobian(phi: &Vec3) -> Matrix3<f64> {
    left_jacobian(&-phi)
}

pub fn right_jacobian_inv(phi: &Vec3) -> Matrix3<f64> {
    left_jacobian_inv(&-phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn hat_matches_printed_layout() {
        let m = hat(&Vec3::new(1.0, 2.0, 3.0));
        let expected = Matrix3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_eq!(m, expected);
        assert_eq!(hat(&Vec3::zeros()), Matrix3::zeros());
        assert_eq!(vee(&m), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn quarter_turn_about_x() {
        let r = SO3::exp(&Vec3::new(FRAC_PI_2, 0.0, 0.0));
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert!((r.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn log_rejects_half_turn() {
        let r = SO3::exp(&Vec3::new(0.0, 0.0, std::f64::consts::PI));
        assert!(matches!(r.log(), Err(Error::AngleNearPi { .. })));
    }

    #[test]
    fn small_angle_branches_are_continuous() {
        let phi = Vec3::new(3e-8, -2e-8, 5e-8);
        let above = phi * (1.0000001 * SMALL_ANGLE / phi.norm()) * 1.01;
        for v in [phi, above] {
            let r = SO3::exp(&v);
            assert!((r.log().unwrap() - v).norm() < 1e-20);
            let j = left_jacobian(&v) * left_jacobian_inv(&v);
            assert!((j - Matrix3::identity()).norm() < 1e-14);
        }
    }

    #[test]
    fn projection_repairs_drift() {
        let r = SO3::exp(&Vec3::new(0.3, -0.2, 0.9));
        let noisy = r.matrix() + Matrix3::from_element(1e-6);
        let fixed = SO3::from_matrix_projected(&noisy);
        assert!(fixed.orthogonality_error() < 1e-14);
        assert!((fixed.matrix().determinant() - 1.0).abs() < 1e-14);
        assert!((fixed.matrix() - r.matrix()).norm() < 1e-5);
    }
}
