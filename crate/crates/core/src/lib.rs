//! Information asymmetry index toolkit.
//!
//! Firms are rated by pairwise analyst choices with an Elo scheme ([`elo`]),
//! and the resulting index is checked against market proxies: probability of
//! informed trading ([`pin`]), analyst and price based metrics ([`proxy`]) and
//! pooled OLS with backward elimination ([`validation`]).
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elo;
pub mod error;
pub mod firm;
pub mod numeric;
pub mod optim;
pub mod pin;
pub mod proxy;
pub mod synthetic;
pub mod validation;
pub mod votes;
pub mod waves;

pub use elo::{
    apply_vote, expected_win_probability, replay, replay_with, snapshot_ranking, EloConfig, ExpectationMode,
    RankedFirm, RatingState, ReplayOptions,
};
pub use error::{Error, Result};
pub use firm::{Firm, FirmId, FirmUniverse};
pub use pin::{PinFit, PinParams, TradeDay};
pub use proxy::FirmPanelRow;
pub use validation::{Ranking, RegressionFit};
pub use votes::VoteEvent;
