use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// The variants are grouped so that a front end can map them onto a small
/// set of exit codes (see [`Error::kind`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {actual} ({context})")]
    ShapeMismatch { expected: usize, actual: usize, context: &'static str },

    #[error("subcarrier index {index} out of range for {available} subcarriers")]
    IndexOutOfRange { index: usize, available: usize },

    #[error("infeasible problem: outage {achieved:.6e} at the power caps exceeds threshold {threshold:.6e}")]
    Infeasible { achieved: f64, threshold: f64 },

    #[error("evaluation budget exceeded: {needed} evaluations needed, cap is {cap}")]
    BudgetExceeded { needed: u64, cap: u64 },

    #[error("record {index}: {source}")]
    Record {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (last finite loss {last_finite:?})")]
    NonFiniteLoss { epoch: usize, batch: usize, last_finite: Option<f64> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },

    #[error("{path}: unsupported format version {found:?} (expected {expected:?})")]
    SchemaVersion { path: PathBuf, found: String, expected: String },

    #[error("{path}: invariant violated: {message}")]
    InvariantViolation { path: PathBuf, message: String },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Infeasible,
    Io,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArguments(_) | Error::ShapeMismatch { .. } | Error::IndexOutOfRange { .. } => {
                ErrorKind::Usage
            }
            Error::Infeasible { .. } => ErrorKind::Infeasible,
            Error::Io { .. }
            | Error::Schema { .. }
            | Error::SchemaVersion { .. }
            | Error::InvariantViolation { .. } => ErrorKind::Io,
            Error::Domain(_) | Error::BudgetExceeded { .. } | Error::Internal(_) | Error::NonFiniteLoss { .. } => {
                ErrorKind::Numeric
            }
            Error::Record { source, .. } => source.kind(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArguments(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
