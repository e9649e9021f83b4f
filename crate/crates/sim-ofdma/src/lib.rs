//! Experiment runner for the stacked-metasurface OFDMA optimizer: config
//! files, result tables and the NMSE, BER, sum-rate and single-run sweeps.

pub mod experiments;
pub mod oracles;
pub mod output;
pub mod settings;

use sim_ofdma_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 2 config, 3 infeasible, 4 solver, 1 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Infeasible(_) => 3,
            RunError::Solver(_) => 4,
            RunError::Io(_) => 1,
        }
    }
}

fn root_cause(e: &Error) -> &Error {
    match e {
        Error::Step { source, .. } => root_cause(source),
        other => other,
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match root_cause(&e) {
            Error::Infeasible(_) => RunError::Infeasible(e.to_string()),
            Error::Config(_) | Error::Domain { .. } => RunError::Config(e.to_string()),
            _ => RunError::Solver(e),
        }
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(std::io::Error::other(e))
    }
}
