//! Configuration, result files, plots and recipes for the `qpulse-sim` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod recipes;
pub mod units;
pub mod validate;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("result contains NaN at {0}")]
    NanValue(String),
}

impl CliError {
    /// Process exit code: 1 for bad input, 2 for failures inside the simulation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) | CliError::NanValue(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical",
            CliError::NanValue(_) => "nan",
        }
    }

    /// One-line JSON rendering for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<qpulse_core::Error> for CliError {
    fn from(e: qpulse_core::Error) -> Self {
        use qpulse_core::Error as E;
        match e {
            E::InvalidPulse(_)
            | E::BadSampleCount(_)
            | E::SpanTooSmall(_)
            | E::InvalidParams(_)
            | E::InvalidTolerance(_)
            | E::InvalidGrid(_)
            | E::TauMaxTooSmall { .. }
            | E::InvalidPlan(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
