use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition or type invariant.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("class index {index} out of range for {num_classes} classes")]
    ClassOutOfRange { index: usize, num_classes: usize },

    #[error("no samples for class(es) {missing:?}")]
    MissingClasses { missing: Vec<usize> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("design violates the power budget of device {device}: uses {used:.6e}, budget {budget:.6e}")]
    PowerViolation { device: usize, used: f64, budget: f64 },

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error(
        "solver did not converge after {iterations} iterations \
         (dual change {dual_change:.3e}, power violation {power_violation:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        dual_change: f64,
        power_violation: f64,
    },

    /// Too many Monte Carlo trials had to be dropped because a solver failed
    /// to converge.
    #[error("{excluded} of {total} solver runs did not converge, above the {limit_percent}% budget")]
    ExclusionBudget {
        excluded: usize,
        total: usize,
        limit_percent: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
