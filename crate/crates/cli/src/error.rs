use thiserror::Error;

use spreadlab_core::ErrorKind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] spreadlab_core::Error),

    #[error("output: {0}")]
    Io(#[from] std::io::Error),

    /// A verification ran to completion but its verdict is negative.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Toml(_) | CliError::Json(_) | CliError::Io(_) => 2,
            CliError::CheckFailed(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input | ErrorKind::Io => 2,
                ErrorKind::Precondition => 3,
                ErrorKind::Convergence => 4,
                ErrorKind::Numerical => 5,
            },
        }
    }
}
