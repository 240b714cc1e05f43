use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) | CliError::Config(_) => 2,
            CliError::Unsupported(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }
}
