//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A Cholesky pivot was non-positive. Callers that can tolerate this
    /// (ill-conditioned precisions) must regularize explicitly, e.g. via
    /// [`crate::linalg::cholesky_jittered`].
    #[error("matrix not positive definite: pivot {pivot:.3e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// The training loss or one of its terms became non-finite.
    #[error("non-finite training loss ({0})")]
    NonFiniteLoss(String),

    /// Predictive variance too small for a meaningful improvement value.
    #[error("degenerate predictive variance {0:.3e}")]
    DegenerateVariance(f64),

    /// Exact hypervolume is implemented for 2 and 3 objectives only.
    #[error("hypervolume supports 2 or 3 objectives, got {0}")]
    UnsupportedDimension(usize),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("input outside problem bounds: {0:?}")]
    OutOfBounds(Vec<f64>),

    /// `logdiff_hv` curves need the maximum hypervolume to diff against.
    #[error("metric `logdiff_hv` requires max_hv")]
    MissingMaxHv,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed record data: {0}")]
    MalformedRecord(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
