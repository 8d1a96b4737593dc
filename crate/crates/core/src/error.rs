use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid control field: {0}")]
    InvalidField(String),

    #[error("invalid noise grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target operator is not unitary (deviation {0:e})")]
    NonUnitaryTarget(f64),

    #[error("degenerate sample design: {0}")]
    DegenerateDesign(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("surrogate fit failed: {0}")]
    FitFailed(String),

    #[error("degenerate validation: {0}")]
    DegenerateValidation(String),

    #[error("no valid surrogate after {attempts} attempts (last p_fit = {last_p_fit:.4})")]
    ModelValidationFailed { attempts: usize, last_p_fit: f64 },

    #[error("objective became non-finite at evaluation {evaluation}")]
    NonFiniteObjective { evaluation: usize },

    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
