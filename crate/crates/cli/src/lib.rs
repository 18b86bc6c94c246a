//! Scenario-driven front end for the bias-stabilization laboratory:
//! scenario-file loading and validation, trace CSV I/O, and the command
//! implementations behind the `mzm-lab` binary.

pub mod commands;
pub mod csvio;
pub mod scenario;

use std::fmt;

/// Command-level error, split by exit code: validation failures exit with
/// 2, I/O failures with 3.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "validation error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mzm_core::Error> for CliError {
    fn from(e: mzm_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
