use thiserror::Error;

/// Errors produced by the fiberid library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signature would have {n} samples, need at least {min}")]
    TooFewSamples { n: usize, min: usize },

    #[error("sample rate {rate_hz} Hz below Nyquist requirement {required_hz} Hz")]
    Aliasing { rate_hz: f64, required_hz: f64 },

    #[error("round-trip delay 2(d+L)/v = {delay_s} s exceeds sweep time {t_sw_s} s")]
    SweepTimeConstraint { delay_s: f64, t_sw_s: f64 },

    #[error("filter bandwidth {bandwidth_hz} Hz exceeds sweep span {delta_f_hz} Hz")]
    BandwidthExceedsSpan { bandwidth_hz: f64, delta_f_hz: f64 },

    #[error("band [{f_lo_hz}, {f_hi_hz}] Hz does not fit below Nyquist {nyquist_hz} Hz")]
    BandOutOfRange {
        f_lo_hz: f64,
        f_hi_hz: f64,
        nyquist_hz: f64,
    },

    #[error("trace shape mismatch: {reason}")]
    ShapeMismatch { reason: String },

    #[error("input has {got} samples, need at least {need}")]
    TooShortInput { got: usize, need: usize },

    #[error("signature lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },

    #[error("label already enrolled: {0}")]
    DuplicateLabel(String),

    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("invalid transceiver transition: {0}")]
    InvalidTransition(String),

    #[error("malformed signature file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
