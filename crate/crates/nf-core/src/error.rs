use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CoreError {
    #[error("negative variance {0}")]
    NegativeVariance(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("state diverged (non-finite value) at t = {t}")]
    Divergence { t: f64 },

    #[error("variance {value} dropped below -1e-12 at t = {t}")]
    Integrity { t: f64, value: f64 },

    #[error("query {t} outside the covered window [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("resource limit: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> CoreError {
    CoreError::InvalidParameter { name: name.to_string(), reason: reason.into() }
}

/// Upper bound on time steps for one integration.
pub const MAX_STEPS: f64 = 1e8;

/// `round(t_end / dt)`, refused when it exceeds [`MAX_STEPS`].
pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    let n = (t_end / dt).round();
    if !(n <= MAX_STEPS) {
        return Err(CoreError::Resource(format!("{n:e} steps of dt = {dt:e} exceed the limit of {MAX_STEPS:e}")));
    }
    Ok(n as usize)
}
