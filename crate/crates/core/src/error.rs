use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("refused: {0}")]
    Refused(String),

    #[error("degenerate moments: {0}")]
    DegenerateMoments(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    /// The closed-form edge-probability estimator divides by a quantity
    /// that vanished on this graph.
    #[error("near-singular estimator (denominator {denominator:e})")]
    NearSingularEstimator { denominator: f64 },

    #[error("numeric failure in sweep {sweep}: {detail}")]
    NumericFailure { sweep: usize, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
