use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown potential kind `{0}`")]
    UnknownKind(String),

    #[error("singular resolvent multiplier at omega = {re} + {im}i; use limiting absorption")]
    SingularMultiplier { re: f64, im: f64 },

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("limiting absorption diverged at lambda = {lambda}: contraction ratio {ratio:.3}")]
    Divergent { lambda: f64, ratio: f64 },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
