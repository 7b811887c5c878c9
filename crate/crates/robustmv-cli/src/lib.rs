//! Batch front end for the robustmv library: CSV ingestion, model
//! persistence, and subcommands for fitting, prediction, resampling,
//! stress diagnostics, scenario simulation and outlier maps.

pub mod commands;
pub mod io;
pub mod model;

pub use commands::run_command;

/// Command failures, split by exit-code class.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: unknown option values, missing required settings.
    Usage(String),
    /// Valid invocation that failed while computing or touching files.
    Failure(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn failure(msg: impl Into<String>) -> Self {
        CliError::Failure(msg.into())
    }
}

impl From<robustmv::error::Error> for CliError {
    fn from(e: robustmv::error::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("i/o error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
