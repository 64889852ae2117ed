use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: no rows")]
    NoRows { path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("matrix is rank deficient")]
    RankDeficient,

    #[error("matrix is not positive semidefinite (min eigenvalue estimate {0:e})")]
    Indefinite(f64),

    #[error("{0}")]
    Numerical(String),

    #[error("report: {0}")]
    Report(String),

    #[error("unsupported report schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::DimensionMismatch(_)
            | Error::Parse { .. }
            | Error::NoRows { .. }
            | Error::Io { .. }
            | Error::Report(_)
            | Error::SchemaVersion { .. }
            | Error::Json(_) => ErrorClass::Data,
            Error::RankDeficient | Error::Indefinite(_) | Error::Numerical(_) => {
                ErrorClass::Numerical
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
