use thiserror::Error;

#[derive(Debug, Error)]
pub enum MolError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("boundary error: {0}")]
    Boundary(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("membership error: {0}")]
    Membership(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("bracketing failed: {0}")]
    Bracket(String),
    #[error("monotonicity violated: {0}")]
    Monotonicity(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, MolError>;
