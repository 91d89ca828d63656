use thiserror::Error;

use crate::instance::InstanceError;
use crate::mdp::Violation;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{what} is not a probability vector: {reason}")]
    NotStochastic { what: String, reason: String },
    #[error("empty candidate list at {location}")]
    EmptyCandidates { location: String },
    #[error("{what}: {count} combinations exceed the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        count: u128,
        cap: usize,
    },
    #[error("no elementwise-minimal kernel combination (state {state} disagrees)")]
    NoMinimalCombination { state: usize },
    #[error("invalid MDP: {}", join_violations(.0))]
    InvalidMdp(Vec<Violation>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        })
    }
}
