use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or out-of-contract input (non-finite entries, wrong shapes, unknown keys).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A scalar argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed to converge or met a singular matrix.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// The request exceeds what the implementation supports (e.g. tensor grids above d = 3).
    #[error("capability exceeded: {0}")]
    Capability(String),
    /// A structural precondition does not hold (e.g. building blocks of a non-normal operator).
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
