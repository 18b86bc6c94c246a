use thiserror::Error;

/// Errors produced by model construction, unit conversions and the
/// simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("power must be positive to express in dBm, got {0} mW")]
    NonPositivePower(f64),

    #[error("probe step must be nonzero")]
    ZeroProbeStep,

    #[error("slope magnitude {slope:e} is below the singularity guard {guard:e}")]
    SlopeBelowGuard { slope: f64, guard: f64 },

    #[error("compensation schedule is empty")]
    EmptySchedule,

    #[error("time {t} s is outside the scenario range [0, {duration}] s")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("scenario sampled backwards in time: {t} s after {last} s")]
    NonMonotonicSample { t: f64, last: f64 },

    #[error("trace is empty")]
    EmptyTrace,
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
