use thiserror::Error;

/// Errors raised across the benchmark.
///
/// Variants are grouped so the CLI can map them onto distinct exit codes:
/// configuration problems, bad input data, and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("too many features for exact enumeration: {d} > {max}")]
    TooManyFeatures { d: usize, max: usize },

    #[error("AUC band [{lo:.4}, {hi:.4}] not reached in {epochs} epochs (last AUC {last:.4})")]
    BandUnreachable {
        lo: f64,
        hi: f64,
        epochs: usize,
        last: f64,
        trajectory: Vec<f64>,
    },

    #[error("malformed ranking: {0}")]
    MalformedRanking(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Category used by the CLI to choose an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } | Error::TooManyFeatures { .. } => ErrorKind::Config,
            Error::Data(_)
            | Error::Row { .. }
            | Error::MissingColumn(_)
            | Error::SingleClass
            | Error::DimensionMismatch { .. }
            | Error::MalformedRanking(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::Singular(_) | Error::NonFinite(_) | Error::BandUnreachable { .. } => ErrorKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

pub type Result<T> = std::result::Result<T, Error>;
