use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter space: {0}")]
    Validation(String),

    #[error("{param} = {value} is outside [{min}, {max}]")]
    Range {
        param: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid argument: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("model fitting failed: {0}")]
    Fitting(String),

    #[error("candidate pool exhausted: every candidate is excluded or already selected")]
    Exhausted,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid campaign state: {0}")]
    State(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unsupported campaign file version {found} (this build reads {supported}.x)")]
    Version { found: String, supported: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
