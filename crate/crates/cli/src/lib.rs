//! Command-line front end for the `freeknot` library: experiment dispatch,
//! config resolution and report writing.

pub mod config;
pub mod report;
pub mod run;
pub mod spline_file;

use thiserror::Error;

pub use config::{Experiment, Format, RunConfig, Settings};
pub use report::ExperimentReport;
pub use run::{execute, run_experiment};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] freeknot::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl RunError {
    /// Process exit code: 3 for numeric failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        RunError::Io { path: path.display().to_string(), source }
    }
}
