//! CLI-side error type with process exit codes.

use std::fmt;
use std::path::PathBuf;

/// Anything a command can fail with.
#[derive(Debug)]
pub enum CliError {
    /// Numeric/statistical failure from the core.
    Core(survmil_core::Error),
    /// Filesystem problem, with the offending path.
    Io { path: PathBuf, source: std::io::Error },
    Json { path: PathBuf, source: serde_json::Error },
    Csv(csv::Error),
    /// Bad flags, malformed inputs, or inconsistent files.
    Invalid(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Json { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Csv(e) => write!(f, "{e}"),
            CliError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Json { path, source }
    }

    /// Exit code: 2 for validation problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl From<survmil_core::Error> for CliError {
    fn from(e: survmil_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
