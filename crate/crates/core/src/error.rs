use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An argument would leave the range where periodic reduction is accurate.
    #[error("range error: {0}")]
    Range(String),
    /// A configured size cap (breakpoints, enumeration count) was exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    /// Two jump points that give the same implied g(1) by symmetry.
    #[error("degenerate jump pair s1={s1}, s2={s2}: the implied g(1) is symmetric under s -> 1-s")]
    DegeneratePair { s1: f64, s2: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
