use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Schema(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("bound violation found: {0}")]
    BoundViolation(String),

    #[error("self-test failed: {0}")]
    SelftestFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Schema(_) => 2,
            CliError::Hypothesis(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::BoundViolation(_) => 5,
            CliError::SelftestFailed(_) => 6,
        }
    }
}

/// Core failures while a command runs (after the config was accepted).
impl From<dualmink_core::Error> for CliError {
    fn from(e: dualmink_core::Error) -> Self {
        match e {
            dualmink_core::Error::Hypothesis(m) => CliError::Hypothesis(m),
            other => CliError::NonConvergence(other.to_string()),
        }
    }
}
