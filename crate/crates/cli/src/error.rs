use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, invalid parameters or a malformed configuration file.
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Malformed input data.
    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] egreg_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for usage and schema problems, 1 for everything that went wrong
    /// while running.
    pub fn exit_code(&self) -> i32 {
        use egreg_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Parameter(_) | E::Config(_) | E::Dimension(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
