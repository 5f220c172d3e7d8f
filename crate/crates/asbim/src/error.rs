//! Unified error type. Variants map onto distinct CLI exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input data; message names the offending row.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// Bad dimensions, invalid configuration values, unknown keys.
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite values or numerically impossible requests.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Structurally valid input with no usable information (fully-missing
    /// sequence, all positions masked, zero variance where variance is
    /// required).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Outcome imputation cannot proceed (too few complete cases,
    /// singular design).
    #[error("imputation error: {0}")]
    Imputation(String),

    /// Training diverged or was asked to violate its contract.
    #[error("training error at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// A caller broke a documented precondition (e.g. missing outcome
    /// where imputation was required first).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Bug guard: impossible state reached.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// CLI exit code classes. 5 is reserved for acceptance-check failures
/// (e.g. a gradient check exceeding its threshold), which are not errors.
pub const EXIT_INGESTION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_ACCEPTANCE: i32 = 5;
pub const EXIT_IO: i32 = 6;
pub const EXIT_INTERNAL: i32 = 7;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Ingestion(_) | Error::Csv(_) => EXIT_INGESTION,
            Error::Config(_) | Error::Contract(_) => EXIT_CONFIG,
            Error::Numerical(_)
            | Error::Degenerate(_)
            | Error::Imputation(_)
            | Error::Training { .. } => EXIT_NUMERICAL,
            Error::Io(_) => EXIT_IO,
            Error::Internal(_) => EXIT_INTERNAL,
        }
    }
}
