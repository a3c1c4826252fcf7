use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration value that cannot be used, with the field it came from.
    #[error("invalid {field}: {message}")]
    Spec { field: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Core(#[from] ctree_core::Error),
}

impl CliError {
    pub fn spec(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Spec {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
