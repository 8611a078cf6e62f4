use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} exceeds cap ({size} > {cap})")]
    CapExceeded { what: &'static str, size: u128, cap: u128 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// The geometric tail behind the TVD envelope diverges at or beyond
    /// `lambda = 1/(1+e)`.
    #[error("series does not converge for lambda = {0} (radius is 1/(1+e))")]
    Divergent(f64),

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
