use thiserror::Error;

pub type Result<T> = std::result::Result<T, QuenchError>;

#[derive(Debug, Error)]
pub enum QuenchError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("root tracking failed: {0}")]
    Tracking(String),

    #[error("no positive spreading speed: {0}")]
    NoSpreadingSpeed(String),

    #[error("no sign change of {what} over [{lo}, {hi}]")]
    NoSignChange { what: &'static str, lo: f64, hi: f64 },

    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("blow-up at step {step} (t = {t:.4}): {detail}")]
    BlowUp { step: u64, t: f64, detail: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QuenchError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        QuenchError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
