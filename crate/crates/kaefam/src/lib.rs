//! Experiment runner for `kaefam-core`: configuration, commands and report bundles.

pub mod config;
mod plot;
pub mod run;

pub use config::{load_config, parse_config, LoadedConfig, RunConfig};
pub use run::{run_experiment, Command, ReportBundle, Status};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}
