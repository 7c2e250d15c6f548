use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use iai_core::FirmId;

/// Pairs shown per session.
pub const PAIRS_PER_SESSION: usize = 10;

/// Smallest active universe that can fill a session: C(5,2) = 10.
pub const MIN_ACTIVE_FIRMS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analyst {
    pub analyst_id: String,
    pub certified: bool,
    pub state_of_residence: String,
    pub created_at: DateTime<Utc>,
}

/// Two firms in display order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub firm_a: FirmId,
    pub firm_b: FirmId,
}

impl Pair {
    pub fn new(firm_a: FirmId, firm_b: FirmId) -> Self {
        Pair { firm_a, firm_b }
    }

    /// Order-free key for duplicate checks.
    pub fn unordered(&self) -> (FirmId, FirmId) {
        if self.firm_a <= self.firm_b {
            (self.firm_a.clone(), self.firm_b.clone())
        } else {
            (self.firm_b.clone(), self.firm_a.clone())
        }
    }

    pub fn contains(&self, firm: &FirmId) -> bool {
        &self.firm_a == firm || &self.firm_b == firm
    }
}

/// A session as persisted. Progress is not stored: it is the count of
/// logged votes carrying the session id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub analyst_id: String,
    pub pairs: Vec<Pair>,
    pub created_at: DateTime<Utc>,
}

impl Session {
    pub fn validate(&self) -> Result<(), String> {
        if self.pairs.len() != PAIRS_PER_SESSION {
            return Err(format!("session {} has {} pairs", self.session_id, self.pairs.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for pair in &self.pairs {
            if pair.firm_a == pair.firm_b {
                return Err(format!("session {} pairs {} with itself", self.session_id, pair.firm_a));
            }
            if !seen.insert(pair.unordered()) {
                return Err(format!(
                    "session {} repeats pair {}/{}",
                    self.session_id, pair.firm_a, pair.firm_b
                ));
            }
        }
        Ok(())
    }
}

/// Session plus derived progress.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: Session,
    pub next_index: usize,
}
