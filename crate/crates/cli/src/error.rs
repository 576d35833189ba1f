use std::path::PathBuf;

use thiserror::Error;

/// Failures of the command-line layer. Each variant maps to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in {file}: at `{at}`: {message}")]
    Config {
        file: String,
        /// JSON path of the offending value, `.` for the document root.
        at: String,
        message: String,
    },

    #[error("parse error in {file}, line {line}, column `{column}`: {reason}")]
    Parse {
        file: String,
        line: u64,
        column: String,
        reason: String,
    },

    #[error("parse error in {file}, line {line}: time {t} does not increase")]
    NonMonotonicTime { file: String, line: u64, t: f64 },

    #[error(transparent)]
    Numerical(#[from] nanol::Error),

    #[error("all {count} trials failed; first failure: {first}")]
    TrialsFailed { count: usize, first: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Parse { .. } | CliError::NonMonotonicTime { .. } => 3,
            CliError::Numerical(_) | CliError::TrialsFailed { .. } => 4,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(file: impl Into<String>, at: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            file: file.into(),
            at: at.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
