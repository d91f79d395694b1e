use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<stein_core::Error> for CliError {
    fn from(e: stein_core::Error) -> Self {
        use stein_core::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::DimensionMismatch { .. }
            | E::MissingScore(_)
            | E::UnexpectedScore
            | E::GridTooLarge { .. }
            | E::TransportTooLarge { .. }
            | E::Parse { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
