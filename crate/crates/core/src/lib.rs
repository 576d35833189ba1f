//! Natural-gradient Gaussian filtering on matrix Lie groups.
//!
//! The crate is organized bottom-up:
//!
//! * [`lie`]: SO(3) and SE_m(3) with exponential/log maps, adjoints,
//!   Jacobians and concentrated Gaussians.
//! * [`models`]: IMU propagation, leg kinematics and invariant
//!   observations.
//! * [`filter`]: the natural-gradient (NANO-L) update and an invariant EKF
//!   baseline sharing one prediction step.
//! * [`sim`]: trajectory and sensor synthesis plus a Monte-Carlo driver.
//! * [`metrics`]: per-step errors, RMSE curves, ATE and relative error.

pub mod error;
pub mod filter;
pub mod lie;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod sim;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lie-groups.md")]
    mod lie_groups {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
