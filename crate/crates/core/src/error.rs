use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension {dim} exceeds the validation limit of {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("QR iteration did not converge within {budget} sweeps")]
    NoConvergence { budget: usize },

    #[error("power iterate norm underflowed after restart")]
    Underflow,

    #[error("Gramian diverges: spectral radius {rho} >= 1")]
    GramianDiverges { rho: f64 },

    #[error("matrix appears defective: eigenvector matrix has sigma_min/sigma_max = {ratio:e}")]
    Defective { ratio: f64 },

    #[error("bound undefined: marginally stable or divergent (rho = {rho})")]
    BoundUndefined { rho: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("token id {token} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
