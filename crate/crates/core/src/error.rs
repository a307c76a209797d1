//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument sits outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Physically or structurally invalid parameter set.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Inputs degenerate to a case with no defined answer (e.g. a
    /// vanishing counting rate).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Observed gains cannot be explained by any yield assignment.
    #[error("infeasible decoy constraints: {0}")]
    Infeasible(String),

    /// A computed bound is inconsistent with the supplied counting rate.
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    /// Requested combination of modes is not implemented.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The key rate never clears the floor inside the search range.
    #[error("no positive key rate: {0}")]
    NoPositiveRate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
