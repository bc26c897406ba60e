use hoc_core::HocError;
use hoc_envs::EnvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Core(#[from] HocError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("learner state: {0}")]
    State(String),
}
