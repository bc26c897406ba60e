use hoc_core::HocError;
use hoc_envs::EnvError;
use hoc_learn::LearnError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Core(#[from] HocError),

    #[error(transparent)]
    Env(#[from] EnvError),

    #[error(transparent)]
    Learn(#[from] LearnError),

    #[error("model error: {0}")]
    Model(String),

    #[error("discount {gamma} is not below 1, so the evaluation operator is not a contraction")]
    Contraction { gamma: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("fixed point not found: {0}")]
    Solve(String),

    #[error("finite-difference step {0} outside [1e-6, 1e-3]")]
    Step(f64),
}
