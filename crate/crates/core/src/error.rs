use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a formula (bad δ, zero count, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: expected {expected} columns, found {found}")]
    Arity {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: label {value:?} has no mapping")]
    UnmappedLabel {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("{path}:{line}: feature index {index} appears more than once")]
    DuplicateIndex {
        path: PathBuf,
        line: usize,
        index: usize,
    },

    #[error("dataset {name}: {field} is {found}, expected {expected}")]
    CountMismatch {
        name: String,
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
