use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid sample at index {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("timestamps not strictly increasing at index {index}")]
    NonMonotoneTimestamps { index: usize },
    #[error("coordinates out of range: lat {lat}, lon {lon}")]
    CoordinateOutOfRange { lat: f64, lon: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("measurements have zero variance")]
    ZeroVariance,
    #[error("forest contains no splits")]
    NoSplits,
    #[error("fit failure: {0}")]
    FitFailure(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("correlation undefined: an evaluation vector has zero variance")]
    UndefinedCorrelation,
    #[error("run produced no transmissions")]
    EmptyRun,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
