use std::fmt;
use std::process::ExitCode;

/// Failure classes mapped onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or invalid input (exit 2).
    Input(String),
    /// Numerical or domain failure while computing (exit 3).
    Math(String),
    /// A validation comparison exceeded its tolerance (exit 4).
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Input(_) => 2,
            CliError::Math(_) => 3,
            CliError::Validation(_) => 4,
        })
    }

    pub fn input(field: &str, reason: impl fmt::Display) -> Self {
        CliError::Input(format!("`{field}`: {reason}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Math(m) => write!(f, "math error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<clb_core::Error> for CliError {
    fn from(e: clb_core::Error) -> Self {
        match e {
            clb_core::Error::InvalidInput { .. } => CliError::Input(e.to_string()),
            other => CliError::Math(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
