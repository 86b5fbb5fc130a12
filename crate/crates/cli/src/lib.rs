//! Scenario runner for the spin7flow toolkit.

use std::path::PathBuf;

use thiserror::Error;

pub mod app;
pub mod config;
pub mod identities;
pub mod runner;

pub use config::{ScenarioConfig, SCENARIOS};
pub use identities::{identity_suite, verify_identities, IdentityReport};
pub use runner::{run, RunOptions, RunReport, RunStatus, RunSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{}: {1}", .0.display())]
    Io(PathBuf, std::io::Error),
}
