use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid crosstalk strength: {0}")]
    InvalidStrength(String),

    #[error("malformed crosstalk matrix: {0}")]
    MalformedMatrix(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("asymptotic regime not applicable: {0}")]
    Regime(String),

    #[error("inconsistent model: {0}")]
    ModelInconsistency(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("trivial target: {0}")]
    TrivialTarget(String),
}

impl Error {
    /// True when the error reflects bad input rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
