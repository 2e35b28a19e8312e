//! Library side of the `nlepi` command-line tool: configuration parsing,
//! the subcommands and their file outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for anything the user can fix in the input, 3 for failures during the computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<nlepi::Error> for CliError {
    fn from(e: nlepi::Error) -> Self {
        match e {
            nlepi::Error::InvalidParameter(_) | nlepi::Error::Regime(_) | nlepi::Error::Precondition(_) => {
                CliError::Invalid(vec![e.to_string()])
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
