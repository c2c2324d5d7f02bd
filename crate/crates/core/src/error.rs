use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum VarxError {
    #[error("series too short: need more than {needed} weeks, have {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("missing history: {0}")]
    MissingHistory(String),

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("non-positive total for `{label}` at week {week}")]
    NonPositiveTotal { label: String, week: String },

    #[error("time indexes do not overlap")]
    NoOverlap,

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("series `{series}` is missing week {week}")]
    Gap { series: String, week: String },

    #[error("duplicate observation for series `{series}` at week {week}")]
    Duplicate { series: String, week: String },

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("invalid region map: {0}")]
    InvalidRegionMap(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("response and exogenous series are not aligned")]
    NotAligned,

    #[error("too few rows: {0}")]
    TooFewRows(String),

    #[error("bad lag configuration: {0}")]
    BadLag(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("bad lambda grid: {0}")]
    BadGrid(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("exogenous futures required but not provided")]
    MissingFutures,

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VarxError>;
