use std::path::PathBuf;

use nalgebra::DVector;
use thiserror::Error;

use crate::solvers::EstimatorTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("closed form requires diagonal scaling")]
    NonDiagonalScaling,

    #[error("inner solve did not converge after {iterations} iterations (residual {residual:e})")]
    InnerNotConverged {
        best: DVector<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("reference solve not stationary (residual {residual:e} after {iterations} iterations)")]
    NotStationary { residual: f64, iterations: usize },

    #[error("solver diverging: objective increased on {consecutive} consecutive backtracked steps")]
    Diverging {
        consecutive: usize,
        trace: Box<EstimatorTrace>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no events")]
    NoEvents,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Stable machine-readable category, printed by the CLI next to the message.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } | Error::Contract(_) => "contract",
            Error::NotSymmetric(_) | Error::NotPositiveDefinite | Error::NonDiagonalScaling => {
                "scaling"
            }
            Error::NonFinite(_)
            | Error::InnerNotConverged { .. }
            | Error::NotStationary { .. }
            | Error::Diverging { .. } => "numerical",
            Error::Parse { .. } | Error::NoEvents => "parse",
            Error::Io { .. } => "io",
            Error::Serialize(_) => "serialize",
            Error::Validation(_) => "validation",
        }
    }

    /// Process exit code used by the CLI for this error category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "contract" => 3,
            "scaling" => 4,
            "numerical" => 5,
            "parse" => 6,
            "io" => 7,
            "validation" => 9,
            _ => 8,
        }
    }
}
