use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or invalid parameters.
    Config,
    /// Unreadable, malformed or otherwise unusable input data.
    Data,
    /// The numerics broke down on otherwise valid input.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: length {len}, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("non-positive value {value} at index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("dates must be strictly increasing (index {index})")]
    DatesNotIncreasing { index: usize },

    #[error("dates length {dates} does not match values length {values}")]
    DateLengthMismatch { values: usize, dates: usize },

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window length {window} exceeds series length {len}")]
    EmptyOutput { window: usize, len: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("scale {scale} too large for series of length {len}")]
    ScaleTooLarge { scale: usize, len: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("all segments have zero variance at scale {scale}")]
    DegenerateSurface { scale: usize },

    #[error("need at least {need} scales in fit range, found {found}")]
    InsufficientScales { found: usize, need: usize },

    #[error("Legendre transform failed: {0}")]
    TransformFailed(String),

    #[error("spectrum width undefined: {reason} (alpha0 = {alpha0})")]
    WidthUndefined {
        reason: String,
        alpha0: f64,
        coefficients: [f64; 5],
    },

    #[error("incompatible inputs: {0}")]
    IncompatibleInputs(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("{path}: row {row}: {message}")]
    Ingest {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("currency conversion: {0}")]
    Conversion(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::InvalidGrid(_)
            | Error::InvalidSpec(_)
            | Error::Config(_)
            | Error::InsufficientScales { .. }
            | Error::ScaleTooLarge { .. } => ErrorClass::Config,
            Error::Degenerate(_)
            | Error::DegenerateSurface { .. }
            | Error::TransformFailed(_)
            | Error::WidthUndefined { .. } => ErrorClass::Numerical,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn at_stage(self, stage: impl Into<String>) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.into(),
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
