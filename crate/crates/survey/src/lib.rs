//! Survey service: analysts vote on pairs of firms, each choice is appended
//! to a durable log and ratings are always derived by replaying it.

pub mod api;
pub mod error;
pub mod model;
pub mod pairing;
pub mod store;

pub use api::{router, serve, AppState};
pub use error::{Result, ServiceError};
pub use model::{Analyst, Pair, Session, SessionView, MIN_ACTIVE_FIRMS, PAIRS_PER_SESSION};
pub use pairing::PairingPolicy;
pub use store::{NextPair, Store, StoreOptions, VoteReceipt};
