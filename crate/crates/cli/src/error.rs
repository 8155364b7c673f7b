use std::path::PathBuf;

use qprob::QprobError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("no {kind} named {name:?} in the instance (available: {available})")]
    MissingName { kind: &'static str, name: String, available: String },

    #[error(transparent)]
    Compute(#[from] QprobError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("invalid instance at {location}: {message}")]
    Invalid { location: String, message: String },
}

impl CliError {
    /// 2 usage / missing name, 3 failed precondition, 4 I/O or parse.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::MissingName { .. } => 2,
            CliError::Compute(_) => 3,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Invalid { .. } => 4,
        }
    }

    pub(crate) fn invalid(location: impl Into<String>, message: impl ToString) -> Self {
        CliError::Invalid { location: location.into(), message: message.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
