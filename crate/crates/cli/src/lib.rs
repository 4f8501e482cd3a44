//! Batch runner for lattice-gibbs: reads a TOML run configuration, executes
//! the requested checks and writes CSV results plus a JSON manifest.

pub mod config;
pub mod run;
pub mod tasks;

use thiserror::Error;

pub use config::{RunConfig, Task};
pub use run::{report, run, ExitStatus, RunManifest, TaskStatus};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_ENV: &str = "LATTICE_GIBBS_OUTPUT";

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("manifest problem: {0}")]
    Manifest(String),
}
