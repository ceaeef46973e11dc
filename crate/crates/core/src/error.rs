use thiserror::Error;

/// Errors raised by the estimators and tests.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    #[error("subject {index}: exit time {exit} must be strictly after entry time {entry}")]
    NonPositiveDuration { index: usize, entry: f64, exit: f64 },

    #[error("subject {index}: times must be finite and non-negative")]
    InvalidTime { index: usize },

    #[error("tied exit time {time} in sample (tie policy is reject)")]
    TiesPresent { time: f64 },

    #[error("invalid interval [{start}, {end}]")]
    InvalidInterval { start: f64, end: f64 },

    #[error("sample `{label}` has an empty risk set at the right end of the interval ({time})")]
    EmptyRiskSet { label: String, time: f64 },

    #[error("grid does not contain event time {time}")]
    GridMismatch { time: f64 },

    #[error("covariance grids differ")]
    CovGridMismatch,

    #[error("weight is not admissible here: {0}")]
    InadmissibleWeight(&'static str),

    #[error("degenerate variance estimate ({0})")]
    DegenerateVariance(f64),

    #[error("expected {expected} multipliers for group {group}, got {got}")]
    MultiplierCountMismatch {
        group: usize,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("chi-square domain error: {0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
