use thiserror::Error;

/// Failures mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("resource exhausted: {0}")]
    Resource(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::VerifyFailed(_) => 1,
            Self::Config(_) => 2,
            Self::Resource(_) | Self::Io(_) => 3,
        }
    }
}

impl From<rmflab::Error> for CliError {
    fn from(e: rmflab::Error) -> Self {
        match e {
            rmflab::Error::Resource(_) => Self::Resource(e.to_string()),
            rmflab::Error::Io(io) => Self::Io(io),
            rmflab::Error::Csv(_) => Self::Resource(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Config(e.to_string())
    }
}
