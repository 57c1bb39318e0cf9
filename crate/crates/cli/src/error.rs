use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed input: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{0}")]
    Core(#[from] advdesign::Error),
    /// Some replications diverged; outputs were still written.
    #[error("{0} replication(s) diverged")]
    Diverged(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Diverged(_) => 3,
            CliError::Core(advdesign::Error::NonFinite(_)) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
