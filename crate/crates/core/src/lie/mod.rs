//! Matrix Lie group primitives for SO(3) and SE_m(3).

mod gaussian;
pub mod sem3;
pub mod so3;

pub use gaussian::ConcentratedGaussian;
pub use sem3::{bch_first_order, little_adjoint, wedge, SEm3, SmallArg, Tangent};
pub use so3::{hat, vee, Vec3, SO3};
