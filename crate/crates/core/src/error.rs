use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("no convergence after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("singular covariance: {0}; use the canonical ridge or SAR instead")]
    Singular(String),

    #[error("zero association: {0}")]
    ZeroAssociation(String),

    #[error("unknown design '{name}' (valid: uncorrelated, correlated, high_dimensional, overparametrized)")]
    UnknownDesign { name: String },

    #[error("fit failed on fold {fold}: {message}")]
    Fold { fold: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
