//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the beamforming library.
#[derive(Debug, Error)]
pub enum Error {
    /// An angle fell outside the ULA field of view [-pi/2, pi/2].
    #[error("angle {angle_rad} rad is outside [-pi/2, pi/2]")]
    AngleOutOfRange { angle_rad: f64 },

    /// A vector or matrix dimension did not match the array geometry.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A scalar argument violated its domain (non-positive distance, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration field failed validation. `field` names the offender.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// File, serialization or I/O failure in the CLI layer.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
