//! Crate-wide error type.
//!
//! Errors are grouped by how the CLI maps them to exit codes: configuration
//! problems, data problems (ingestion, alignment, insufficient samples), and
//! numeric problems (singular fits, nonstationarity, undefined statistics).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("schema error in {path}: {msg}")]
    Schema { path: String, msg: String },

    #[error("validation error at {path}:{line}: {msg}")]
    Validation {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("insufficient cross-section: need at least {required} assets, got {actual}")]
    InsufficientCrossSection { required: usize, actual: usize },

    #[error("insufficient breadth at {date}: need at least {required} eligible assets, got {actual}")]
    InsufficientBreadth {
        date: String,
        required: usize,
        actual: usize,
    },

    #[error("nonstationary system: spectral radius {radius:.6} >= 1")]
    NonStationary { radius: f64 },

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("undefined beta: {0}")]
    UndefinedBeta(String),

    #[error("collinear regressors: {columns:?}")]
    Collinear { columns: Vec<String> },

    #[error("empty leg {leg} at {date}")]
    EmptyLeg { date: String, leg: String },

    #[error("leverage undefined at {date}: leg beta {beta:.6} is not positive")]
    LeverageUndefined { date: String, beta: f64 },

    #[error("sharpe undefined: return series has zero variance")]
    SharpeUndefined,

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Validation { .. }
            | Error::Alignment(_)
            | Error::InsufficientData { .. }
            | Error::InsufficientCrossSection { .. }
            | Error::InsufficientBreadth { .. } => 3,
            _ => 4,
        }
    }
}
