use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),

    /// The active universe cannot fill a session.
    #[error("capacity: {0}")]
    Capacity(String),

    /// The client voted on a pair other than the session's current one.
    #[error("ordering: session {session_id} expects pair_index {expected}, got {got}")]
    Ordering {
        session_id: String,
        expected: usize,
        got: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("persistence: {0}")]
    Persistence(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] iai_core::Error),
}

impl ServiceError {
    /// Short machine-readable tag used in API error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Capacity(_) => "capacity",
            ServiceError::Ordering { .. } => "ordering",
            ServiceError::Contract(_) => "contract",
            ServiceError::Persistence(_) => "persistence",
            ServiceError::Core(iai_core::Error::Contract(_)) => "contract",
            ServiceError::Core(iai_core::Error::Parse(_)) => "contract",
            ServiceError::Core(_) => "internal",
        }
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
