//! Three-joint leg kinematics (hip abduction, thigh, calf).

use nalgebra::Matrix3;

use crate::lie::Vec3;

/// Link lengths and hip placement of one leg.
///
/// `side` is `+1` for left legs and `−1` for right legs; it flips the sign
/// of the hip link so the same formula serves both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegGeometry {
    pub hip: f64,
    pub thigh: f64,
    pub calf: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    pub side: f64,
}

impl LegGeometry {
    fn signed_hip(&self) -> f64 {
        self.hip * self.side
    }

    /// Dimensions of a mid-size commercial quadruped, legs ordered
    /// FL, FR, RL, RR.
    pub fn quadruped() -> [LegGeometry; 4] {
        let leg = |ox: f64, oy: f64, side: f64| LegGeometry {
            hip: 0.0955,
            thigh: 0.213,
            calf: 0.213,
            offset_x: ox,
            offset_y: oy,
            side,
        };
        [
            leg(0.1934, 0.0465, 1.0),
            leg(0.1934, -0.0465, -1.0),
            leg(-0.1934, 0.0465, 1.0),
            leg(-0.1934, -0.0465, -1.0),
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.hip > 0.0 && self.thigh > 0.0 && self.calf > 0.0 && self.side.abs() == 1.0
    }

    /// Upper bound on `‖fk(φ)‖`.
    pub fn reach_bound(&self) -> f64 {
        Vec3::new(self.offset_x, self.offset_y, 0.0).norm() + self.hip + self.thigh + self.calf
    }
}

/// Foot position in the body frame.
pub fn forward_kinematics(phi: &Vec3, g: &LegGeometry) -> Vec3 {
    let (s1, c1) = phi.x.sin_cos();
    let (s2, c2) = phi.y.sin_cos();
    let (s23, c23) = (phi.y + phi.z).sin_cos();
    let lh = g.signed_hip();
    Vec3::new(
        g.offset_x - g.thigh * s2 - g.calf * s23,
        g.offset_y + lh * c1 + g.thigh * c2 * s1 + g.calf * s1 * c23,
        lh * s1 - g.thigh * c1 * c2 - g.calf * c1 * c23,
    )
}

/// `∂ fk / ∂ φ`.
pub fn fk_jacobian(phi: &Vec3, g: &LegGeometry) -> Matrix3<f64> {
    let (s1, c1) = phi.x.sin_cos();
    let (s2, c2) = phi.y.sin_cos();
    let (s23, c23) = (phi.y + phi.z).sin_cos();
    let (lh, lt, lc) = (g.signed_hip(), g.thigh, g.calf);
    Matrix3::new(
        0.0,
        -lc * c23 - lt * c2,
        -lc * c23,
        lt * c1 * c2 - lh * s1 + lc * c1 * c23,
        -s1 * (lc * s23 + lt * s2),
        -lc * s23 * s1,
        lt * c2 * s1 + lh * c1 + lc * s1 * c23,
        c1 * (lc * s23 + lt * s2),
        lc * s23 * c1,
    )
}

/// Nominal standing joint configuration.
pub const STANCE_ANGLES: [f64; 3] = [0.0, 0.8, -1.5];

/// Joint angles reaching `target`, by damped Newton iteration from `guess`.
///
/// Used to synthesize encoder readings; returns `None` when the target is
/// out of reach or the iteration stalls.
#[doc(hidden)]
pub fn solve_joint_angles(target: &Vec3, g: &LegGeometry, guess: &Vec3) -> Option<Vec3> {
    let mut phi = *guess;
    let mut lambda = 1e-6;
    let mut err = forward_kinematics(&phi, g) - target;
    for _ in 0..100 {
        if err.norm() < 1e-12 {
            return Some(phi);
        }
        let j = fk_jacobian(&phi, g);
        let jt = j.transpose();
        let step = (jt * j + Matrix3::identity() * lambda)
            .try_inverse()?
            * (jt * err);
        let cand = phi - step;
        let cand_err = forward_kinematics(&cand, g) - target;
        if cand_err.norm() < err.norm() {
            phi = cand;
            err = cand_err;
            lambda = (lambda * 0.1).max(1e-12);
        } else {
            lambda *= 10.0;
            if lambda > 1e6 {
                break;
            }
        }
    }
    (err.norm() < 1e-10).then_some(phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> LegGeometry {
        LegGeometry::quadruped()[0]
    }

    #[test]
    fn zero_angles() {
        let g = geom();
        let r = forward_kinematics(&Vec3::zeros(), &g);
        let expected = Vec3::new(g.offset_x, g.offset_y + g.hip, -g.thigh - g.calf);
        assert!((r - expected).norm() < 1e-15);
    }

    #[test]
    fn thigh_quarter_turn() {
        // φ2 = π/2: s2 = s23 = 1, c2 = c23 = 0.
        let g = geom();
        let r = forward_kinematics(&Vec3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0), &g);
        let expected = Vec3::new(g.offset_x - g.thigh - g.calf, g.offset_y + g.hip, 0.0);
        assert!((r - expected).norm() < 1e-15);
    }

    #[test]
    fn jacobian_at_zero() {
        // Column 1 at φ = 0: [0, l_t + l_c, l_h]; first entry always zero.
        let g = geom();
        let j = fk_jacobian(&Vec3::zeros(), &g);
        assert_eq!(j[(0, 0)], 0.0);
        assert!((j[(1, 0)] - (g.thigh + g.calf)).abs() < 1e-15);
        assert!((j[(2, 0)] - g.hip).abs() < 1e-15);
    }

    #[test]
    fn right_legs_mirror_left() {
        let [fl, fr, ..] = LegGeometry::quadruped();
        let phi = Vec3::new(0.2, 0.7, -1.4);
        let l = forward_kinematics(&phi, &fl);
        let r = forward_kinematics(&Vec3::new(-0.2, 0.7, -1.4), &fr);
        assert!((l.x - r.x).abs() < 1e-15 && (l.y + r.y).abs() < 1e-15 && (l.z - r.z).abs() < 1e-15);
    }

    #[test]
    fn unreachable_target_fails() {
        let g = geom();
        assert!(solve_joint_angles(&Vec3::new(0.0, 0.0, -2.0), &g, &Vec3::from(STANCE_ANGLES)).is_none());
    }
}
