//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("network generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coarse mesh element {element} contains no network nodes; coarsen H or densify the network")]
    EmptyElement { element: usize },

    #[error("singular local Gram matrix on element {element}")]
    SingularGram { element: usize },

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    Indefinite { index: usize, pivot: f64 },

    #[error("zero pivot at index {0} in factorization")]
    ZeroPivot(usize),

    #[error("iterative solver did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular saddle-point system: {0}")]
    SingularSaddle(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
