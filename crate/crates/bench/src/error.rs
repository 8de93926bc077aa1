use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] hyperpower::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no k = 0 reference record for mesh {mesh}, degree {degree}, schur {schur}")]
    MissingReference { mesh: usize, degree: usize, schur: String },
    #[error("malformed record: {0}")]
    Record(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
