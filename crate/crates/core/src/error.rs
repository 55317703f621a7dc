use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("convergence failure: {reason} (partial value {partial:?}, error estimate {error_estimate:?})")]
    Convergence {
        reason: String,
        partial: Option<f64>,
        error_estimate: Option<f64>,
    },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("not a Hida distribution for these parameters: rule {rule}, slack {slack:?}")]
    Refusal { rule: String, slack: Option<f64> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn convergence(reason: impl Into<String>, partial: f64, err: f64) -> Self {
        Error::Convergence {
            reason: reason.into(),
            partial: Some(partial),
            error_estimate: Some(err),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
