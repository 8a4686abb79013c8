use thiserror::Error;

/// Errors raised by the numerical routines and the campaign runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("point lies outside the grid extents")]
    OffGrid,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("CFL violation: dt = {dt:e} exceeds stable limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("no convergence after {iterations} iterations (relative change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },
    #[error("field does not vanish on the lateral boundary (max |v| = {0:e})")]
    BoundaryTrace(f64),
    #[error("support reaches the computational boundary")]
    SupportTouchesBoundary,
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
