use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operation not supported in this space: {0}")]
    Unsupported(String),
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("penalty escalation exceeded its bound at stage {stage}: {escalations} > {limit}")]
    PenaltyEscalation { stage: usize, escalations: usize, limit: usize },
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
