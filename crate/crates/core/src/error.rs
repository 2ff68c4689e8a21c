use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: expected {expected}, got {found} ({context})")]
    Shape {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("invalid actuator map: {0}")]
    InvalidActuator(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("all {rollouts} rollouts diverged or have infinite augmented cost")]
    AllRolloutsDiverged { rollouts: usize },

    #[error("non-finite gradient from the {term} term")]
    NonFiniteGradient { term: &'static str },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
