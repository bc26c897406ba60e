//! Online tabular learning for N-level hierarchical option-critic agents.

mod episode;
mod error;
mod learner;
pub mod reference;

pub use episode::{EpisodeLog, DEFAULT_STEP_CAP};
pub use error::LearnError;
pub use learner::{Learner, StepRecord};

pub type Result<T> = std::result::Result<T, LearnError>;
