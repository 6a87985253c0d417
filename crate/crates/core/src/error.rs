use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point pattern is empty after {attempts} sampling attempts")]
    EmptyPattern { attempts: u32 },

    #[error("invalid tier probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("closed form needs a common path-loss exponent, got {0:?}")]
    UnequalExponents(Vec<f64>),

    #[error("fractional moment E[H^{delta}] is not available for {model}")]
    UnsupportedMoment { model: String, delta: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}")]
    QuadratureNotConverged { value: f64, error: f64 },

    #[error("inputs do not belong together: {0}")]
    Mismatch(String),

    #[error("insufficient samples for {what}: need {needed}, got {got}")]
    InsufficientSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("instance too large for the brute-force oracle: {0}")]
    InstanceTooLarge(String),

    #[error("configuration error at {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
