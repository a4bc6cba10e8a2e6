use gmle_core::GmleError;
use thiserror::Error;

/// Failures of a CLI run, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Args(#[from] clap::Error),
    #[error("{0}")]
    Data(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] GmleError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Args(e) => match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            },
            CliError::Core(GmleError::InvalidConfig(_) | GmleError::InvalidGrid(_)) => 1,
            CliError::Data(_) | CliError::Io { .. } | CliError::Core(_) => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
