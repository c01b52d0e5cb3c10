use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A negative duple of the axiom set follows from its positive duples.
    #[error("inconsistent axioms{}: negative duple #{index} {description} is implied by the positive duples", batch.map(|b| format!(" in batch {b}")).unwrap_or_default())]
    Inconsistent { index: usize, description: String, batch: Option<usize> },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
