use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("action {action} out of range for {num_actions} actions")]
    Action { action: usize, num_actions: usize },
    #[error("invalid model: {0}")]
    Model(String),
}
