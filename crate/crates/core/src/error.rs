use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// QR factorization found a diagonal entry below the rank threshold.
    #[error("singular matrix: |r_kk| = {magnitude:e} at column {column} is below the rank threshold")]
    SingularMatrix { column: usize, magnitude: f64 },

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// The exhaustive oracle would need more mixture components than allowed.
    #[error("exhaustive enumeration refused: {components:e} components exceed the cap of {cap}")]
    OracleTooLarge { components: f64, cap: u64 },

    #[error("trellis refused: {states:e} states exceed the cap of {cap}")]
    TrellisTooLarge { states: f64, cap: u64 },

    #[error("no intersection: {0}")]
    NoIntersection(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
