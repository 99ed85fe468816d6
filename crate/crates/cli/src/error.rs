use std::path::{Path, PathBuf};

use allocdesign::DesignError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Design(#[from] DesignError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Design(DesignError::Config(msg.into()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Design(e) => e.exit_code() as u8,
            CliError::Io { .. } => 2,
        }
    }
}
