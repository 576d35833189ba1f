//! Invariant observations `y = X⁻¹ b + η`.
//!
//! Only the first three rows of `y` carry noise; the trailing rows are the
//! constant coefficients of `b` and drop out of every residual. All
//! filtering therefore works on the reduced three-vector residual with a
//! 3×3 covariance.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

use super::imu::{ColumnRole, StateLayout};
use super::legs::{fk_jacobian, forward_kinematics, LegGeometry};
use crate::error::{Error, Result};
use crate::lie::{hat, SEm3, Tangent, Vec3};

/// Largest accepted condition number of the reduced covariance.
pub const MAX_GAMMA_CONDITION: f64 = 1e12;

/// Sensor noise levels, one isotropic standard deviation per sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Accelerometer, m/s².
    pub sigma_accel: f64,
    /// Gyroscope, rad/s.
    pub sigma_gyro: f64,
    /// Joint encoder, rad.
    pub sigma_encoder: f64,
    /// Contact slip, m/s.
    pub sigma_slip: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_accel: 0.2568,
            sigma_gyro: 0.00139,
            sigma_encoder: 0.3,
            sigma_slip: 0.001,
        }
    }
}

impl NoiseConfig {
    pub fn is_valid(&self) -> bool {
        [
            self.sigma_accel,
            self.sigma_gyro,
            self.sigma_encoder,
            self.sigma_slip,
        ]
        .iter()
        .all(|s| s.is_finite() && *s > 0.0)
    }
}

/// `Q = diag(σ_ω² I, σ_a² I, 0, σ_s² I …)` laid out per `layout`. Contact
/// blocks are only populated for legs flagged in `in_contact`.
pub fn assemble_process_noise(
    cfg: &NoiseConfig,
    layout: &StateLayout,
    in_contact: &[bool],
) -> DMatrix<f64> {
    let mut diag = DVector::zeros(layout.dim());
    diag.fixed_rows_mut::<3>(0)
        .fill(cfg.sigma_gyro * cfg.sigma_gyro);
    for (col, role) in layout.roles().iter().enumerate() {
        let var = match role {
            ColumnRole::Velocity => cfg.sigma_accel * cfg.sigma_accel,
            ColumnRole::Position => 0.0,
            ColumnRole::Contact(leg) => {
                if in_contact.get(*leg).copied().unwrap_or(false) {
                    cfg.sigma_slip * cfg.sigma_slip
                } else {
                    0.0
                }
            }
        };
        diag.fixed_rows_mut::<3>(layout.block(col)).fill(var);
    }
    DMatrix::from_diagonal(&diag)
}

/// A reduced invariant measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasurement {
    /// First three rows of `y`.
    pub y_reduced: Vec3,
    /// First three rows of `b`.
    pub b_point: Vec3,
    /// Trailing `m` rows of `b`, one coefficient per translational column.
    pub b_coeffs: Vec<f64>,
    /// Noise covariance of the reduced residual.
    pub gamma_reduced: Matrix3<f64>,
    /// Translational column whose point this measurement constrains, if any.
    pub contact_index: Option<usize>,
}

impl InvariantMeasurement {
    /// The full `b` vector, `3 + m` entries.
    pub fn b(&self) -> DVector<f64> {
        let mut b = DVector::zeros(3 + self.b_coeffs.len());
        b.fixed_rows_mut::<3>(0).copy_from(&self.b_point);
        b.rows_mut(3, self.b_coeffs.len())
            .copy_from_slice(&self.b_coeffs);
        b
    }

    /// `h(X)` reduced: first three rows of `X⁻¹ b`.
    pub fn predict(&self, x: &SEm3) -> Vec3 {
        x.inverse_act_point(&self.b_point, &self.b_coeffs)
    }

    /// First three rows of `Exp(−ξ) X⁻¹ b`.
    pub fn reduced_map(&self, x: &SEm3, xi: &Tangent) -> Vec3 {
        let z = self.predict(x);
        SEm3::exp(&-xi).act_point(&z, &self.b_coeffs)
    }

    /// Same as [`reduced_map`](Self::reduced_map) given a precomputed
    /// `z = [X⁻¹ b]_{0..3}`.
    pub fn reduced_map_from(&self, z: &Vec3, xi: &Tangent) -> Vec3 {
        SEm3::exp(&-xi).act_point(z, &self.b_coeffs)
    }

    /// `γ⁻¹`, checked against [`MAX_GAMMA_CONDITION`].
    pub fn gamma_inverse(&self) -> Result<Matrix3<f64>> {
        check_conditioning(&self.gamma_reduced)?;
        self.gamma_reduced
            .try_inverse()
            .ok_or(Error::SingularGamma {
                condition: f64::INFINITY,
            })
    }
}

fn check_conditioning(gamma: &Matrix3<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(*gamma).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_GAMMA_CONDITION) {
        return Err(Error::SingularGamma { condition });
    }
    Ok(())
}

/// Leg odometry: `fk(θ̃) = Rᵀ(s − p) + J_fk n_θ`.
pub fn make_leg_measurement(
    joints: &Vec3,
    cfg: &NoiseConfig,
    geom: &LegGeometry,
    layout: &StateLayout,
    contact_col: usize,
) -> Result<InvariantMeasurement> {
    if !matches!(layout.roles().get(contact_col), Some(ColumnRole::Contact(_))) {
        return Err(Error::InvalidArgument(format!(
            "column {contact_col} is not a contact column"
        )));
    }
    let j = fk_jacobian(joints, geom);
    let gamma = j * j.transpose() * (cfg.sigma_encoder * cfg.sigma_encoder);
    check_conditioning(&gamma)?;
    let mut coeffs = vec![0.0; layout.m()];
    coeffs[layout.position_col()] = 1.0;
    coeffs[contact_col] = -1.0;
    Ok(InvariantMeasurement {
        y_reduced: forward_kinematics(joints, geom),
        b_point: Vec3::zeros(),
        b_coeffs: coeffs,
        gamma_reduced: gamma,
        contact_index: Some(contact_col),
    })
}

/// Body-frame observation of a known world landmark: `c = Rᵀ(m − p) + η`.
pub fn make_landmark_measurement(
    obs: &Vec3,
    landmark: &Vec3,
    sigma_cam: f64,
    layout: &StateLayout,
) -> InvariantMeasurement {
    let mut coeffs = vec![0.0; layout.m()];
    coeffs[layout.position_col()] = 1.0;
    InvariantMeasurement {
        y_reduced: *obs,
        b_point: *landmark,
        b_coeffs: coeffs,
        gamma_reduced: Matrix3::identity() * (sigma_cam * sigma_cam),
        contact_index: None,
    }
}

/// The reduced `(X⁻¹b)^⊙` matrix, `d × 3`.
///
/// With `z = [X⁻¹b]_{0..3}` and `b`'s trailing coefficients `c_i`, the
/// transpose is `[(−z)^∧, c_1 I, …, c_m I]`, which is the derivative of
/// `Exp(δ) X⁻¹ b` at `δ = 0`. For leg odometry the rotation block is
/// `(Rᵀ(p − s))^∧`.
pub fn star_operator(x: &SEm3, meas: &InvariantMeasurement) -> DMatrix<f64> {
    star_from_point(&meas.predict(x), &meas.b_coeffs)
}

pub(crate) fn star_from_point(z: &Vec3, coeffs: &[f64]) -> DMatrix<f64> {
    let d = 3 + 3 * coeffs.len();
    let mut star = DMatrix::zeros(d, 3);
    star.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&hat(&-z).transpose());
    for (i, c) in coeffs.iter().enumerate() {
        if *c != 0.0 {
            star.fixed_view_mut::<3, 3>(3 + 3 * i, 0)
                .copy_from(&(Matrix3::identity() * *c));
        }
    }
    star
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::SO3;

    #[test]
    fn table_one_defaults() {
        let n = NoiseConfig::default();
        assert_eq!(
            (n.sigma_accel, n.sigma_gyro, n.sigma_encoder, n.sigma_slip),
            (0.2568, 0.00139, 0.3, 0.001)
        );
    }

    #[test]
    fn process_noise_pattern() {
        let layout = StateLayout::legged(1);
        let q = assemble_process_noise(&NoiseConfig::default(), &layout, &[true]);
        let diag: Vec<f64> = q.diagonal().iter().copied().collect();
        let expect = |i: usize| match i / 3 {
            0 => 0.00139f64.powi(2),
            1 => 0.2568f64.powi(2),
            2 => 0.0,
            _ => 0.001f64.powi(2),
        };
        for (i, v) in diag.iter().enumerate() {
            assert_eq!(*v, expect(i));
        }
        assert_eq!(q.clone() - DMatrix::from_diagonal(&q.diagonal()), DMatrix::zeros(12, 12));
        let off = assemble_process_noise(&NoiseConfig::default(), &layout, &[false]);
        assert_eq!(off.view((9, 9), (3, 3)).into_owned(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn leg_b_vector() {
        let layout = StateLayout::legged(1);
        let geom = LegGeometry::quadruped()[0];
        let meas = make_leg_measurement(
            &Vec3::new(0.1, 0.8, -1.5),
            &NoiseConfig::default(),
            &geom,
            &layout,
            2,
        )
        .unwrap();
        assert_eq!(meas.b().as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
        let j = fk_jacobian(&Vec3::new(0.1, 0.8, -1.5), &geom);
        assert!((meas.gamma_reduced - j * j.transpose() * 0.09).norm() < 1e-15);
    }

    #[test]
    fn leg_measurement_rejects_non_contact_column() {
        let layout = StateLayout::legged(1);
        let geom = LegGeometry::quadruped()[0];
        let res = make_leg_measurement(&Vec3::zeros(), &NoiseConfig::default(), &geom, &layout, 1);
        assert!(matches!(res, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn singular_leg_jacobian_is_rejected() {
        // Fully stretched leg with zero hip abduction: the calf and thigh
        // columns become parallel.
        let layout = StateLayout::legged(1);
        let geom = LegGeometry::quadruped()[0];
        let res = make_leg_measurement(&Vec3::zeros(), &NoiseConfig::default(), &geom, &layout, 2);
        assert!(matches!(res, Err(Error::SingularGamma { .. })));
    }

    #[test]
    fn landmark_measurement_at_identity() {
        let layout = StateLayout::inertial();
        let m1 = Vec3::new(0.0, 2.0, 2.0);
        let meas = make_landmark_measurement(&m1, &m1, 0.1, &layout);
        assert_eq!(meas.b().as_slice(), &[0.0, 2.0, 2.0, 0.0, 1.0]);
        assert_eq!(meas.predict(&SEm3::identity(2)), m1);
        assert!((meas.gamma_reduced - Matrix3::identity() * 0.01).norm() < 1e-16);
    }

    #[test]
    fn star_at_identity_for_coincident_contact() {
        let layout = StateLayout::legged(1);
        let p = Vec3::new(1.0, 2.0, 3.0);
        let x = layout.compose_state(SO3::identity(), Vec3::zeros(), p, &[p]);
        let meas = InvariantMeasurement {
            y_reduced: Vec3::zeros(),
            b_point: Vec3::zeros(),
            b_coeffs: vec![0.0, 1.0, -1.0],
            gamma_reduced: Matrix3::identity(),
            contact_index: Some(2),
        };
        let star = star_operator(&x, &meas).transpose();
        assert_eq!(star.view((0, 0), (3, 3)).into_owned(), DMatrix::zeros(3, 3));
        assert_eq!(star.view((0, 6), (3, 3)).into_owned(), DMatrix::identity(3, 3));
        assert_eq!(star.view((0, 9), (3, 3)).into_owned(), -DMatrix::identity(3, 3));
    }
}
