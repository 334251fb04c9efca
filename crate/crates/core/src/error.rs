use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate projection: reference matrix is identically zero")]
    DegenerateProjection,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("generation produced a non-finite value in env {env_id}")]
    Generation { env_id: u32 },

    #[error("singular design (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("optimizer diverged at step {step}")]
    Divergence { step: usize },

    #[error("infinite shift: {0}")]
    InfiniteShift(String),

    #[error("{}:{line}: {msg}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o failure on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidDimension(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Empty(_)
            | Error::InfiniteShift(_) => ErrorKind::Validation,
            Error::DegenerateProjection
            | Error::Degenerate(_)
            | Error::Generation { .. }
            | Error::Singular { .. }
            | Error::Divergence { .. } => ErrorKind::Numerical,
            Error::Parse { .. } | Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
