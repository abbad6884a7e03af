use std::fmt;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Insufficient(String),
    Audit(String),
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Insufficient(_) => 3,
            CliError::Audit(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Insufficient(m) => write!(f, "insufficient results: {m}"),
            CliError::Audit(m) => write!(f, "audit failed: {m}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.into())
    }
}

/// Core errors raised while building models from user input are config errors.
pub fn config_err(e: grasp_core::GraspError) -> CliError {
    match e {
        grasp_core::GraspError::Config(m) => CliError::Config(m),
        other => CliError::Config(other.to_string()),
    }
}

pub type CliResult<T> = Result<T, CliError>;
