use std::fmt;
use std::path::Path;

use wnprobe::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;
pub const EXIT_INSUFFICIENT: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: msg.into() }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_FORMAT, message: msg.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::config(format!("{}: {e}", path.display()))
    }

    /// Prefix the message with the file being processed.
    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError { code: self.code, message: format!("{what}: {}", self.message) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NonFinite { .. } | Error::Numeric(_) => EXIT_NUMERIC,
            Error::Format(_) | Error::Parse { .. } | Error::Csv(_) => EXIT_FORMAT,
            Error::InsufficientData { .. } => EXIT_INSUFFICIENT,
            Error::InvalidInput(_) | Error::Config(_) | Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::format(e.to_string())
    }
}
