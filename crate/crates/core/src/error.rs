use thiserror::Error;

pub type Result<T> = std::result::Result<T, HocError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HocError {
    #[error("{what} index {index} out of range (bound {bound})")]
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("level {level} not valid here (hierarchy depth {depth}, allowed {allowed})")]
    Level {
        level: usize,
        depth: usize,
        allowed: &'static str,
    },

    #[error("value {value} outside domain: {reason}")]
    Domain { value: f64, reason: &'static str },

    #[error("malformed option stack: {0}")]
    Stack(String),

    #[error("invalid hierarchy configuration: {0}")]
    Config(String),

    #[error("learner state error: {0}")]
    State(String),
}

impl HocError {
    pub(crate) fn index(what: &'static str, index: usize, bound: usize) -> Self {
        HocError::Index { what, index, bound }
    }
}
