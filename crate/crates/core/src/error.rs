use std::path::PathBuf;

use crate::solver::SolveReport;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// `e^{-Xf}` would overflow because a line integral is below the safe limit.
    #[error("exponential overflow: line integral {value} below {limit}")]
    Overflow { value: f64, limit: f64 },

    /// The solver produced a non-finite residual. The report up to that point is kept.
    #[error("solver diverged after {} iterations", .0.records.len().saturating_sub(1))]
    Diverged(Box<SolveReport>),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
