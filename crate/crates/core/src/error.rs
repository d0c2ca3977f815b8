use thiserror::Error;

/// Errors raised anywhere in the transmission chain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid configuration at `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("units mismatch: expected {expected} signal, got {found}")]
    UnitsMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("every spectral point is flagged as unstable; spectrum cannot be repaired")]
    UnrecoverableSpectrum,

    #[error("backward NFT round-trip residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    SynthesisAccuracy { residual: f64, tolerance: f64 },

    #[error("step policy gives nonlinear phase {phase:.3e} rad per step (limit {limit} rad)")]
    StepTooLarge { phase: f64, limit: f64 },

    #[error("frame geometry mismatch: {0}")]
    FrameMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

pub(crate) fn invalid_field(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidField {
        field: field.into(),
        reason: reason.into(),
    }
}
