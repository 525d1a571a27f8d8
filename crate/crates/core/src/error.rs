use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
///
/// The variants map onto three broad failure classes (bad input data,
/// infeasible numerical requests, I/O) so that drivers can pick an exit code
/// via [`Error::class`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("r = {r} too large for window of size {width} x {height}")]
    RadiusTooLarge { r: f64, width: f64, height: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no eligible healthy pattern for target(s): {0}")]
    NoEligibleHealthy(String),

    #[error("summary undefined; extend grid (max F = {max_f:.4} < {threshold})")]
    SummaryUndefined { max_f: f64, threshold: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("no rows accepted with epsilon = {0}; try quantile mode")]
    NothingAccepted(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::RadiusTooLarge { .. } => ErrorClass::Usage,
            Error::Numeric(_) | Error::SummaryUndefined { .. } | Error::NothingAccepted(_) => {
                ErrorClass::Numeric
            }
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn invalid_data(msg: impl Into<String>) -> Error {
    Error::InvalidData(msg.into())
}
