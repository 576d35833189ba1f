//! System models: IMU propagation, leg kinematics, invariant observations.

pub mod imu;
pub mod legs;
pub mod measurement;

pub use imu::{
    dynamics_matrix, group_affine_residual, group_affine_residual_with, imu_mean_propagate,
    ColumnRole, ImuSample, StateLayout, GRAVITY,
};
pub use legs::{fk_jacobian, forward_kinematics, LegGeometry, STANCE_ANGLES};
pub use measurement::{
    assemble_process_noise, make_landmark_measurement, make_leg_measurement, star_operator,
    InvariantMeasurement, NoiseConfig,
};
