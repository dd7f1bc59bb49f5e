use thiserror::Error;

use crate::quadfield::RingParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ring mismatch: {0} vs {1}")]
    RingMismatch(RingParams, RingParams),

    #[error("invalid ring parameters (p={p}, q={q}): {reason}")]
    InvalidRing { p: u32, q: u32, reason: &'static str },

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("invalid precision: {0} bits (need at least 64)")]
    InvalidPrecision(u32),

    /// The working precision cannot separate a value from the nearest
    /// integer; retry with more bits.
    #[error("precision exhausted at {bits} bits while {context}")]
    PrecisionExhausted { bits: u32, context: String },

    #[error("word at level {level} would have {predicted} letters, over the cap of {cap}")]
    TooLarge { level: u32, predicted: String, cap: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("refused input: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(pos: usize, msg: impl Into<String>) -> Self {
        Error::Parse { pos, msg: msg.into() }
    }

    pub(crate) fn exhausted(bits: u32, context: impl Into<String>) -> Self {
        Error::PrecisionExhausted { bits, context: context.into() }
    }

    /// True for failures that a retry at higher precision may resolve.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::PrecisionExhausted { .. })
    }
}
