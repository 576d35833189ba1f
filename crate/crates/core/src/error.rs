use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The rotation is too close to a half turn for the logarithm to be
    /// well defined (`trace(R) <= -1 + 1e-6`).
    #[error("rotation angle too close to pi for the log map (trace = {trace})")]
    AngleNearPi { trace: f64 },

    /// A covariance could not be factorized even after the jitter retry.
    #[error("matrix is not positive semi-definite ({context})")]
    NotPsd { context: &'static str },

    /// The reduced measurement covariance is numerically singular.
    #[error("measurement covariance is singular (condition number {condition:e})")]
    SingularGamma { condition: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("window of {window} s exceeds the series duration of {duration} s")]
    WindowTooLong { window: f64, duration: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A filter failed while processing one step of a log.
    #[error("{filter} failed at step {step} (t = {t} s): {source}")]
    AtStep {
        filter: String,
        step: usize,
        t: f64,
        source: Box<Error>,
    },

    #[error("trial {trial}: {source}")]
    InTrial { trial: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
