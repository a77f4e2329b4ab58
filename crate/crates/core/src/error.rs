use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty panel: {0}")]
    EmptyPanel(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular correlation matrix: sites {0} and {1} share coordinates")]
    DuplicateSites(String, String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("numerical degeneracy in {0}")]
    Degenerate(String),

    #[error("non-finite state at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },

    #[error("posterior draws already rescaled to original units")]
    AlreadyRescaled,

    #[error("insufficient draws: need at least {required}, have {available}")]
    InsufficientDraws { required: usize, available: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
