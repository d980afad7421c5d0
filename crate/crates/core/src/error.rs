use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid delta {0}: must be positive")]
    InvalidDelta(f64),

    #[error("invalid epsilon {0}: must be positive")]
    InvalidEpsilon(f64),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("certificate failure: {0}")]
    CertificateFailure(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 input, 3 solver, 4 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverFailure(_) | Error::CertificateFailure(_) => 3,
            Error::InvariantViolation(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
