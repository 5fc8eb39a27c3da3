use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation that needs a pure dual quaternion received one with a real part.
    #[error("expected a pure dual quaternion, real parts are ({primary:e}, {dual:e})")]
    NotPure { primary: f64, dual: f64 },

    #[error("expected a unit dual quaternion, norm is ({primary}, {dual:e})")]
    NotUnit { primary: f64, dual: f64 },

    /// The primary part is zero so the dual component of the norm is undefined.
    #[error("degenerate dual quaternion norm: primary part is zero")]
    DegenerateNorm,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("infeasible bounds on {what} axis {axis}: min {min} > max {max}")]
    InfeasibleBounds {
        what: &'static str,
        axis: usize,
        min: f64,
        max: f64,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
