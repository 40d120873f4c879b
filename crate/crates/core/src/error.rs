use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient good frames: {good} good of {total}, need at least {min}")]
    InsufficientGoodFrames { good: usize, total: usize, min: usize },

    #[error("insufficient knots: got {0}, need at least 4")]
    InsufficientKnots(usize),

    #[error("knots must be strictly increasing (violated at index {0})")]
    NonMonotonicKnots(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("expected a {expected} stack, got {found}")]
    WrongKind { expected: &'static str, found: &'static str },

    #[error("empty region: no converged pixels in {0}")]
    EmptyRegion(&'static str),

    #[error("malformed {what} at line {line}: {msg}")]
    Parse { what: &'static str, line: usize, msg: String },

    #[error("bad stack file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures that come from the numerics rather than from the
    /// caller's input shape or files.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InsufficientGoodFrames { .. }
                | Error::InsufficientKnots(_)
                | Error::EmptyRegion(_)
        )
    }
}
