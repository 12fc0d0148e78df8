use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected} modes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("declared Lipschitz bound {declared} exceeded: observed {observed}")]
    LipschitzViolation { declared: f64, observed: f64 },

    #[error("nonlinearity does not vanish at the origin (|B(0)| = {0})")]
    NonzeroAtOrigin(f64),

    #[error("simulation diverged at t = {time}: |u|_H = {norm}")]
    Diverged { time: f64, norm: f64 },

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("gradient potential failed certification: {0}")]
    Uncertified(String),

    #[error("too many censored replicas: {censored} of {replicas} exceeded the step budget")]
    Censored { censored: usize, replicas: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
