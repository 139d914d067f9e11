use thiserror::Error;

/// Errors raised by sampling, calculus, and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The requested variant is not valid in this dimension.
    #[error("unsupported dimension n={n}: {reason}")]
    UnsupportedDimension { n: usize, reason: String },

    #[error("{name}={value} outside the admissible range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: String,
    },

    /// A precondition of an inequality check does not hold on the probes.
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("no admissible truncation level within {window} of {target}")]
    SelectionFailure { target: f64, window: f64 },

    #[error("total scalar curvature bound R0 is required for the u-based decomposition")]
    MissingTotalCurvatureBound,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
