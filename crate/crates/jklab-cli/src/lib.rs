//! Config-driven experiment runner for `jklab`.
//!
//! The binary is a thin wrapper around [`runner::run_experiment`]; the same
//! entry points are used by the integration tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builtin;
pub mod config;
pub mod runner;

use thiserror::Error;

/// Failures of a run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown experiment `{0}` (not a file and not a built-in name; see `jklab list`)")]
    UnknownExperiment(String),

    #[error("resource cap exceeded: {0}")]
    Cap(String),

    #[error("{0}")]
    Library(jklab::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for invalid input, 3 for resource caps, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::UnknownExperiment(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Library(_) | CliError::Io(_) => 1,
        }
    }

    /// Classify a library error raised while preparing a run, where
    /// anything but a cap or an internal failure is a configuration problem.
    pub fn from_setup(e: jklab::Error) -> Self {
        use jklab::Error as E;
        match e {
            E::SizeCap { .. } => CliError::Cap(e.to_string()),
            E::Numeric(_) | E::Io(_) => CliError::Library(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub use config::ExperimentConfig;
pub use runner::{run_experiment, RunOptions, RunOutcome, RunReport};
