//! Filters on SE_m(3) that estimate a tangent-space increment
//! `X = X̂ · Exp(ξ)` relative to the propagated mean.
//!
//! Both filters share [`predict`]; they differ in how the increment
//! posterior is computed from a measurement:
//!
//! * [`nano_update_invariant`] minimizes the variational objective over
//!   Gaussian beliefs with natural-gradient steps. For invariant
//!   observations the Hessian of the negative log-likelihood is constant,
//!   so the covariance is updated once in closed form and only the mean
//!   iterates.
//! * [`inekf_update`] linearizes the measurement map at `ξ = 0`.
//!
//! The stored covariance always describes the right-multiplied increment
//! of the current mean and the increment mean is zero between updates.

mod inekf;
mod nano;

pub use inekf::inekf_update;
pub use nano::{
    cost_j, cubature_points, expectation_of_h, expected_hessian, kl_gaussian, nano_update_detailed,
    nano_update_invariant, ngd_update_generic, Expectation, InvariantLikelihood, Likelihood,
    NanoConfig, NanoUpdate,
};

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::lie::{hat, SEm3, Vec3};
use crate::linalg;
use crate::models::{imu_mean_propagate, ImuSample, StateLayout};

/// Gaussian belief over the increment.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl IncrementBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(Error::Dimension(format!(
                "belief covariance {:?} does not match mean length {}",
                cov.shape(),
                mean.len()
            )));
        }
        Ok(IncrementBelief { mean, cov })
    }

    /// Zero-mean belief with covariance `cov`.
    pub fn centered(cov: DMatrix<f64>) -> Self {
        IncrementBelief {
            mean: DVector::zeros(cov.nrows()),
            cov,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Mean, covariance and layout of a running filter.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub mean: SEm3,
    pub cov: DMatrix<f64>,
    pub layout: StateLayout,
}

impl FilterState {
    pub fn new(mean: SEm3, cov: DMatrix<f64>, layout: StateLayout) -> Result<Self> {
        let d = layout.dim();
        if mean.dim() != d || cov.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "state of dimension {} and covariance {:?} do not match layout dimension {d}",
                mean.dim(),
                cov.shape()
            )));
        }
        Ok(FilterState { mean, cov, layout })
    }

    /// Diagonal initial covariance: `rot_var` on the rotation block and
    /// `other_var` on every translational block.
    pub fn initial_covariance(layout: &StateLayout, rot_var: f64, other_var: f64) -> DMatrix<f64> {
        let d = layout.dim();
        DMatrix::from_fn(d, d, |i, j| match (i == j, i < 3) {
            (true, true) => rot_var,
            (true, false) => other_var,
            _ => 0.0,
        })
    }

    pub fn belief(&self) -> IncrementBelief {
        IncrementBelief::centered(self.cov.clone())
    }
}

/// Linearized increment dynamics: `g^∧` in (velocity row, rotation
/// column), `I` in (position row, velocity column), zero elsewhere.
pub fn build_f(layout: &StateLayout) -> DMatrix<f64> {
    let d = layout.dim();
    let mut f = DMatrix::zeros(d, d);
    let v = layout.block(layout.velocity_col());
    let p = layout.block(layout.position_col());
    f.fixed_view_mut::<3, 3>(v, 0)
        .copy_from(&hat(&layout.gravity));
    f.fixed_view_mut::<3, 3>(p, v)
        .copy_from(&Matrix3::identity());
    f
}

/// Propagates mean and covariance over one IMU interval.
///
/// The increment obeys `ξ_{k+1} = A ξ_k + B n` with `A = I + F dt` and
/// `B = A · Ad_{X̂⁺}` when expressed in world-frame (left-multiplied)
/// coordinates. The covariance is kept in the right-multiplied frame of
/// the current mean, so it is mapped through `Ad_{X̂⁻}` before and
/// `Ad_{X̂⁺}⁻¹` after the linear step:
///
/// `P⁺ = Φ P Φᵀ + G Q dt Gᵀ`, `Φ = Ad_{X̂⁺}⁻¹ A Ad_{X̂⁻}`, `G = Ad_{X̂⁺}⁻¹ B`.
pub fn predict(fs: &FilterState, u: &ImuSample, dt: f64, q: &DMatrix<f64>) -> Result<FilterState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let d = fs.layout.dim();
    if q.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "process noise {:?} does not match state dimension {d}",
            q.shape()
        )));
    }
    let mean = imu_mean_propagate(&fs.mean, u, dt, &fs.layout);
    let a = DMatrix::identity(d, d) + build_f(&fs.layout) * dt;
    let ad_pre = fs.mean.adjoint();
    let ad_post = mean.adjoint();
    let ad_post_inv = mean.adjoint_inv();
    let phi = &ad_post_inv * &a * ad_pre;
    let g = &ad_post_inv * &a * ad_post;
    let cov = &phi * &fs.cov * phi.transpose() + &g * (q * dt) * g.transpose();
    let cov = linalg::symmetrized(cov);
    if cov.diagonal().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NotPsd {
            context: "propagated covariance",
        });
    }
    Ok(FilterState {
        mean,
        cov,
        layout: fs.layout.clone(),
    })
}

/// Re-initializes contact column `col` at touchdown: `s = p̂ + R̂ r` with
/// `r` the body-frame foot position and `r_cov` its covariance.
///
/// To first order the new increment block is `ρ_s = ρ_p − r^∧ φ + n_r`;
/// the covariance rows and columns of the block are rebuilt from that
/// relation.
pub fn reset_contact(fs: &FilterState, col: usize, r: &Vec3, r_cov: &Matrix3<f64>) -> FilterState {
    let layout = &fs.layout;
    let d = layout.dim();
    let s = layout.block(col);
    let p_col = layout.position_col();

    let mut mean = fs.mean.clone();
    let world = fs.mean.col(p_col) + fs.mean.rotation().act(r);
    mean.set_col(col, world);

    let mut gmap = DMatrix::zeros(3, d);
    gmap.fixed_view_mut::<3, 3>(0, 0).copy_from(&-hat(r));
    gmap.fixed_view_mut::<3, 3>(0, layout.block(p_col))
        .copy_from(&Matrix3::identity());

    let mut cov = fs.cov.clone();
    // Drop the stale block before mapping.
    cov.rows_mut(s, 3).fill(0.0);
    cov.columns_mut(s, 3).fill(0.0);
    let cross = &gmap * &cov;
    let mut block = &cross * gmap.transpose();
    for i in 0..3 {
        for j in 0..3 {
            block[(i, j)] += r_cov[(i, j)];
        }
    }
    cov.rows_mut(s, 3).copy_from(&cross);
    cov.columns_mut(s, 3).copy_from(&cross.transpose());
    cov.view_mut((s, s), (3, 3)).copy_from(&block);

    FilterState {
        mean,
        cov: linalg::symmetrized(cov),
        layout: layout.clone(),
    }
}
