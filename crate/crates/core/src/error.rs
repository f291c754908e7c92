use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point} outside declared domain {domain}")]
    Domain { point: String, domain: String },

    #[error("resource limit: {what} needs {size} but the cap is {cap}")]
    ResourceLimit { what: String, size: f64, cap: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("algorithm failure: {message}")]
    AlgorithmFailure {
        message: String,
        /// Diagnostic payload, e.g. per-corner gradient estimates.
        details: Vec<Vec<f64>>,
    },

    #[error("dimension too small: d = {d}, minimal admissible d = {min_d:.6e}")]
    DimensionTooSmall { d: usize, min_d: f64 },

    #[error("verification failed: {0}")]
    Verification(String),

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

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Domain { .. } | Error::DimensionTooSmall { .. } => 2,
            Error::ResourceLimit { .. } => 3,
            Error::ContractViolation(_) | Error::AlgorithmFailure { .. } => 4,
            Error::Verification(_) => 5,
            Error::Unsupported(_) => 2,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        }
    }
}
