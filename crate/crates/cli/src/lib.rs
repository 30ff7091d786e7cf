//! Scenario runner behind the `trgeo` binary.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod output;
pub mod run;
pub mod scenario;

use serde::Serialize;

pub use output::{write_artifacts, Artifacts, Cell, Table};
pub use run::{execute, RunOptions};
pub use scenario::{parse_scenario, Scenario, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("unknown operation {0:?}")]
    UnknownOperation(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] trgeo::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "ParseError",
            CliError::UnknownOperation(_) => "UnknownOperation",
            CliError::Invalid(_) => "InvalidScenario",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "Io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Failure as recorded in `results.json`.
#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub kind: String,
    pub message: String,
    pub numerical: bool,
}

impl From<&CliError> for FailureRecord {
    fn from(e: &CliError) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
            numerical: e.exit_code() == EXIT_NUMERICAL,
        }
    }
}
