use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape error: expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error at step {step}: {message}")]
    Numerical { step: usize, message: String },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("singularity: density {value} at (t index {t}, x index {x}) is not bounded away from 0 and 1")]
    Singularity { t: usize, x: usize, value: f64 },

    #[error("infeasible current at (t index {t}, x index {x}): {message}")]
    Infeasible { t: usize, x: usize, message: String },

    #[error("window error: local window {window} is smaller than observable range {range}")]
    Window { window: usize, range: usize },

    #[error("newton iteration failed on time slice {slice}: {message}")]
    Iteration { slice: usize, message: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("corrupted bookkeeping: conservation residual {residual} at site {site}")]
    Bookkeeping { site: i64, residual: i64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
