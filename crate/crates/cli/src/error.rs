use slim_core::SlimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Invalid or inconsistent input data (exit 2).
    #[error(transparent)]
    Data(#[from] SlimError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(SlimError::ConfigInvalid(_)) => 1,
            Self::Data(_) | Self::Io { .. } => 2,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
