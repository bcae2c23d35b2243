use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid too small: boundary density {ratio:.3e} of peak at t = {time}")]
    GridTooSmall { time: f64, ratio: f64 },

    #[error("internal consistency violated: {0}")]
    Internal(String),

    #[error("node evaluation at x = {x}: density {rho:.3e} below threshold")]
    NodeEvaluation { x: f64, rho: f64 },

    #[error("{unresolved} unresolved outcomes (of {total})")]
    Unresolved { unresolved: usize, total: usize },

    #[error("run failed: {failed} of {total} samples escaped or unresolved (limit {limit:.2e})")]
    RunFailure { failed: usize, total: usize, limit: f64 },

    #[error("partitions were built from different hidden samples")]
    InvalidPairing,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("equivalence scan disagreement: {0}")]
    ScanDisagreement(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
