//! Batch front end for the ektau geometry toolkit: configuration, dispatch
//! of the analysis commands, artifact output and the verification suite.

pub mod commands;
pub mod config;
pub mod expr;
pub mod output;
pub mod verify;

use thiserror::Error;

/// Failures of a run, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(String),
    #[error(transparent)]
    Core(#[from] ektau::Error),
    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    /// 1 for invalid input or failed validation, 2 for solver failures.
    pub fn exit_code(&self) -> u8 {
        use ektau::Error as E;
        match self {
            CliError::Solver(_) => 2,
            CliError::Core(
                E::NoConvergence { .. } | E::Singular(_) | E::NotPositiveDefinite(_) | E::Numeric(_) | E::Degenerate { .. },
            ) => 2,
            _ => 1,
        }
    }
}
