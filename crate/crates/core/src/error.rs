//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data is malformed (dimension mismatches, bad
    /// labels, out-of-range parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A state or operator violates a structural invariant
    /// (non-Hermitian density matrix, negative eigenvalue, trace drift).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A numerical procedure failed to reach its target accuracy or
    /// produced an inconsistent result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A requested quantity is not defined for the given configuration
    /// (e.g. a degenerate steady state, a non-thermal unit stream where
    /// a thermal one is required).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
