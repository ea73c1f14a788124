use thiserror::Error;

/// Errors produced by the simulator and controller.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input or intermediate value was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// A parameter block violates its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A scene specification cannot be built.
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    /// Every sampled rollout hit the sentinel cost, so no update is possible.
    #[error("optimizer starvation: all {0} rollouts were discarded")]
    Starvation(usize),
    /// Malformed configuration document.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
