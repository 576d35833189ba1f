//! Synthetic trajectories and sensors, and the harness that runs filters
//! over them.

pub mod harness;
pub mod sensors;
pub mod trajectory;

pub use harness::{
    layout_for, log_init, run_monte_carlo, run_trial, truth_init, FilterKind, FilterModel, FilterRun,
    FilterSpec, FilterSummary, McConfig, McSummary, TimingStats, TrialFailure, TrialOptions,
    NOISELESS_MODEL_SIGMA_CAM,
};
pub use sensors::{
    default_landmarks, in_stance, synthesize_legged, synthesize_sensors, SensorLog, SensorRow,
    SensorSetup, DEFAULT_GAIT_PERIOD, DEFAULT_SIGMA_CAM,
};
pub use trajectory::{
    generate_ground_truth, integrate_substepped, GroundTruth, TrajectoryProfile, SUBSTEPS,
};
