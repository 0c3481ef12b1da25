use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("dimension n = {0} is not supported (need n >= 5)")]
    Dimension(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("eigensolver failure ({reason}); condition estimate {condition:e}")]
    Eigen { reason: String, condition: f64 },
}
