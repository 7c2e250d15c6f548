use thiserror::Error;

/// Errors raised by the index pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Vote events were out of sequence, unsorted or gapped.
    #[error("replay order error: expected seq {expected}, found {found}")]
    ReplayOrder { expected: u64, found: u64 },

    /// A numeric input was outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    /// Every optimizer start failed; carries one diagnostic line per start.
    #[error("estimation failed after {} starts: {}", .0.len(), .0.join("; "))]
    EstimationFailure(Vec<String>),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("join error: duplicate row for firm {firm} in wave {wave}")]
    Join { firm: String, wave: String },

    /// The design matrix is rank deficient.
    #[error("collinear regressors: {}", .0.join(", "))]
    Collinearity(Vec<String>),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
