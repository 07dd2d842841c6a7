use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a documented precondition (shape, range, symmetry).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A local-linear neighbourhood had too few points with positive weight.
    #[error(
        "degenerate neighbourhood: {effective_n} points with positive weight, need {required}"
    )]
    DegenerateNeighborhood { effective_n: usize, required: usize },

    /// No sample point produced a usable gradient estimate.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    /// The requested mode cannot be applied to this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed input data or configuration.
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
