use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("infeasible assignment: {0}")]
    Infeasible(String),
    #[error("instance too large for exhaustive search: {candidates} candidates exceed {limit}")]
    TooLarge { candidates: u128, limit: u128 },
    #[error("degenerate effective channel: {0}")]
    DegenerateChannel(&'static str),
    #[error("channel on subcarrier {0} is rank deficient")]
    RankDeficient(usize),
    #[error("no convergence after {iterations} iterations: {detail}")]
    NotConverged { iterations: usize, detail: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{step} step failed: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_step(self, step: &'static str) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}
