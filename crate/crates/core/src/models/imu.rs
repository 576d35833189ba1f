//! IMU-driven propagation on SE_m(3).

use nalgebra::DMatrix;

use crate::lie::{hat, SEm3, Vec3, SO3};

/// Standard gravity, world frame, z up.
pub const GRAVITY: [f64; 3] = [0.0, 0.0, -9.81];

/// One IMU reading: body angular rate (rad/s) and specific force (m/s²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub omega: Vec3,
    pub accel: Vec3,
}

/// What a translational column of the state holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Velocity,
    Position,
    /// World position of a foot contact point, by leg index.
    Contact(usize),
}

/// Column assignment of an SE_m(3) state plus the gravity vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    roles: Vec<ColumnRole>,
    velocity: usize,
    position: usize,
    pub gravity: Vec3,
}

impl StateLayout {
    /// Returns `None` unless there is exactly one velocity and one position
    /// column.
    pub fn new(roles: Vec<ColumnRole>) -> Option<Self> {
        let find = |role| {
            let mut hits = roles.iter().enumerate().filter(|(_, r)| **r == role);
            let first = hits.next()?.0;
            hits.next().is_none().then_some(first)
        };
        let velocity = find(ColumnRole::Velocity)?;
        let position = find(ColumnRole::Position)?;
        Some(StateLayout {
            roles,
            velocity,
            position,
            gravity: Vec3::from(GRAVITY),
        })
    }

    /// SE_2(3): `[R | v p]`.
    pub fn inertial() -> Self {
        Self::new(vec![ColumnRole::Velocity, ColumnRole::Position]).unwrap()
    }

    /// `[R | v p s_0 … s_{n−1}]`, SE_{2+n}(3).
    pub fn legged(contacts: usize) -> Self {
        let mut roles = vec![ColumnRole::Velocity, ColumnRole::Position];
        roles.extend((0..contacts).map(ColumnRole::Contact));
        Self::new(roles).unwrap()
    }

    pub fn with_gravity(mut self, g: Vec3) -> Self {
        self.gravity = g;
        self
    }

    pub fn m(&self) -> usize {
        self.roles.len()
    }

    pub fn dim(&self) -> usize {
        3 + 3 * self.roles.len()
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn velocity_col(&self) -> usize {
        self.velocity
    }

    pub fn position_col(&self) -> usize {
        self.position
    }

    /// Column holding contact point `leg`, if present.
    pub fn contact_col(&self, leg: usize) -> Option<usize> {
        self.roles
            .iter()
            .position(|r| *r == ColumnRole::Contact(leg))
    }

    /// Contact legs in column order.
    pub fn contacts(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.roles.iter().enumerate().filter_map(|(col, r)| match r {
            ColumnRole::Contact(leg) => Some((col, *leg)),
            _ => None,
        })
    }

    /// Row offset of column `col` in tangent coordinates.
    pub fn block(&self, col: usize) -> usize {
        3 + 3 * col
    }

    /// Builds a state from rotation, velocity, position and contact points
    /// (in leg order).
    pub fn compose_state(&self, rot: SO3, v: Vec3, p: Vec3, contacts: &[Vec3]) -> SEm3 {
        let cols = self
            .roles
            .iter()
            .map(|r| match r {
                ColumnRole::Velocity => v,
                ColumnRole::Position => p,
                ColumnRole::Contact(leg) => contacts.get(*leg).copied().unwrap_or_default(),
            })
            .collect();
        SEm3::new(rot, cols)
    }
}

/// One forward-Euler step of the noise-free dynamics.
///
/// `R ← R Exp(ω̃ dt)`, `v ← v + (R ã + g) dt`, `p ← p + v dt` with the
/// velocity and rotation taken before the update. Contact columns are
/// unchanged.
pub fn imu_mean_propagate(x: &SEm3, u: &ImuSample, dt: f64, layout: &StateLayout) -> SEm3 {
    let r = x.rotation();
    let v = *x.col(layout.velocity_col());
    let p = *x.col(layout.position_col());
    let mut out = x.clone();
    out.set_rotation(r.compose(&SO3::exp(&(u.omega * dt))));
    out.set_col(layout.velocity_col(), v + (r.act(&u.accel) + layout.gravity) * dt);
    out.set_col(layout.position_col(), p + v * dt);
    out
}

/// `f_u(X)`, the noise-free vector field as a `(3+m) × (3+m)` matrix.
pub fn dynamics_matrix(x: &SEm3, u: &ImuSample, layout: &StateLayout) -> DMatrix<f64> {
    let n = 3 + layout.m();
    let r = x.rotation().matrix();
    let mut f = DMatrix::zeros(n, n);
    f.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(r * hat(&u.omega)));
    f.fixed_view_mut::<3, 1>(0, 3 + layout.velocity_col())
        .copy_from(&(r * u.accel + layout.gravity));
    f.fixed_view_mut::<3, 1>(0, 3 + layout.position_col())
        .copy_from(x.col(layout.velocity_col()));
    f
}

/// `‖f(X1X2) − f(X1)X2 − X1 f(X2) + X1 f(I) X2‖_F` for an arbitrary vector
/// field `f`.
pub fn group_affine_residual_with<F>(f: F, x1: &SEm3, x2: &SEm3) -> f64
where
    F: Fn(&SEm3) -> DMatrix<f64>,
{
    let m1 = x1.matrix();
    let m2 = x2.matrix();
    let id = SEm3::identity(x1.m());
    let lhs = f(&x1.compose(x2));
    let rhs = f(x1) * &m2 + &m1 * f(x2) - &m1 * f(&id) * &m2;
    (lhs - rhs).norm()
}

/// Group-affine residual of the IMU dynamics.
pub fn group_affine_residual(x1: &SEm3, x2: &SEm3, u: &ImuSample, layout: &StateLayout) -> f64 {
    group_affine_residual_with(|x| dynamics_matrix(x, u, layout), x1, x2)
}
