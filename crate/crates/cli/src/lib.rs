//! Library side of the `pfa-lab` binary: command implementations, file
//! formats and the run manifest embedded in every report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod formats;
pub mod manifest;

use pfa_core::Error as CoreError;

pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => EXIT_INVALID_INPUT,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Core(e) => match e.root() {
                CoreError::BudgetExceeded { .. } => EXIT_BUDGET,
                CoreError::NoConvergence { .. } => EXIT_VERIFICATION,
                _ => EXIT_INVALID_INPUT,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_BUDGET => "resource-budget",
            EXIT_VERIFICATION => "verification",
            _ => "invalid-input",
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
