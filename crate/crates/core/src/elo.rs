//! Elo rating engine behind the information asymmetry index.
//!
//! Each vote is a match between two firms. The winner gains `(1 - p) * k`
//! points, where `p` is its expected win probability before the match, and the
//! loser gives up exactly the same amount. The expectation comes either from
//! the classic 51-band lookup table (default) or the logistic Elo curve.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firm::{FirmId, FirmUniverse};
use crate::votes::VoteEvent;

pub const DEFAULT_K_FACTOR: f64 = 24.0;
pub const DEFAULT_INITIAL_RATING: f64 = 1500.0;

/// Upper bound (inclusive) of each rating-difference band and the favourite's
/// win expectation in percent. Differences above the last bound map to 100.
const EXPECTATION_BANDS: [(u32, u8); 50] = [
    (3, 50),
    (10, 51),
    (17, 52),
    (25, 53),
    (32, 54),
    (39, 55),
    (46, 56),
    (53, 57),
    (61, 58),
    (68, 59),
    (76, 60),
    (83, 61),
    (91, 62),
    (98, 63),
    (106, 64),
    (113, 65),
    (121, 66),
    (129, 67),
    (137, 68),
    (145, 69),
    (153, 70),
    (162, 71),
    (170, 72),
    (179, 73),
    (188, 74),
    (197, 75),
    (206, 76),
    (215, 77),
    (225, 78),
    (235, 79),
    (245, 80),
    (256, 81),
    (267, 82),
    (278, 83),
    (290, 84),
    (302, 85),
    (315, 86),
    (328, 87),
    (344, 88),
    (357, 89),
    (374, 90),
    (391, 91),
    (411, 92),
    (432, 93),
    (456, 94),
    (484, 95),
    (517, 96),
    (559, 97),
    (619, 98),
    (735, 99),
];

/// How the pre-match win expectation is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectationMode {
    /// Banded lookup table; the difference is rounded to an integer first.
    #[default]
    Table,
    /// `1 / (1 + 10^(-diff/400))`.
    Logistic,
}

impl std::str::FromStr for ExpectationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(ExpectationMode::Table),
            "logistic" => Ok(ExpectationMode::Logistic),
            other => Err(Error::Parse(format!("unknown expectation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloConfig {
    pub k_factor: f64,
    pub initial_rating: f64,
    pub expectation_mode: ExpectationMode,
}

impl Default for EloConfig {
    fn default() -> Self {
        EloConfig {
            k_factor: DEFAULT_K_FACTOR,
            initial_rating: DEFAULT_INITIAL_RATING,
            expectation_mode: ExpectationMode::Table,
        }
    }
}

impl EloConfig {
    pub fn with_k(k_factor: f64) -> Result<Self> {
        let config = EloConfig {
            k_factor,
            ..Default::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor > 0.0 && self.k_factor.is_finite()) {
            return Err(Error::Contract(format!(
                "k_factor must be positive, got {}",
                self.k_factor
            )));
        }
        if !self.initial_rating.is_finite() {
            return Err(Error::Contract("initial_rating must be finite".into()));
        }
        Ok(())
    }
}

/// Win expectation of the higher-rated side for a non-negative rating gap.
pub fn expected_win_probability(diff: f64, mode: ExpectationMode) -> Result<f64> {
    if diff.is_nan() || diff < 0.0 {
        return Err(Error::Contract(format!("rating difference must be >= 0, got {diff}")));
    }
    Ok(match mode {
        ExpectationMode::Table => table_expectation(diff.round()),
        ExpectationMode::Logistic => 1.0 / (1.0 + 10f64.powf(-diff / 400.0)),
    })
}

fn table_expectation(rounded: f64) -> f64 {
    let pct = EXPECTATION_BANDS
        .iter()
        .find(|(upper, _)| rounded <= f64::from(*upper))
        .map_or(100, |&(_, pct)| pct);
    f64::from(pct) / 100.0
}

/// Current index: a score per rated firm plus the replay cursor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RatingState {
    pub scores: BTreeMap<FirmId, f64>,
    /// Sequence number of the last replayed vote; 0 before any.
    pub last_applied: u64,
}

impl RatingState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every firm of the universe at `initial_rating`, nothing applied yet.
    pub fn seeded(universe: &FirmUniverse, initial_rating: f64) -> Self {
        RatingState {
            scores: universe.ids().map(|id| (id.clone(), initial_rating)).collect(),
            last_applied: 0,
        }
    }

    pub fn rating(&self, firm: &FirmId) -> Option<f64> {
        self.scores.get(firm).copied()
    }

    pub fn total(&self) -> f64 {
        self.scores.values().sum()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Applies a vote whose seq immediately follows the cursor.
    pub fn apply(&mut self, event: &VoteEvent, config: &EloConfig) -> Result<f64> {
        let expected = self.last_applied + 1;
        if event.seq != expected {
            return Err(Error::ReplayOrder {
                expected,
                found: event.seq,
            });
        }
        let exchanged = self.exchange(event, config)?;
        self.last_applied = event.seq;
        Ok(exchanged)
    }

    /// Advances the cursor past a vote without touching scores.
    fn skip(&mut self, event: &VoteEvent) -> Result<()> {
        let expected = self.last_applied + 1;
        if event.seq != expected {
            return Err(Error::ReplayOrder {
                expected,
                found: event.seq,
            });
        }
        self.last_applied = event.seq;
        Ok(())
    }

    fn exchange(&mut self, event: &VoteEvent, config: &EloConfig) -> Result<f64> {
        event.validate()?;
        let winner = &event.winner;
        let loser = event.loser();
        let w = *self.scores.entry(winner.clone()).or_insert(config.initial_rating);
        let l = *self.scores.entry(loser.clone()).or_insert(config.initial_rating);

        let favourite_expectation = expected_win_probability((w - l).abs(), config.expectation_mode)?;
        let winner_expectation = if w >= l {
            favourite_expectation
        } else {
            1.0 - favourite_expectation
        };
        let points = (1.0 - winner_expectation) * config.k_factor;

        *self.scores.get_mut(winner).expect("inserted above") = w + points;
        *self.scores.get_mut(loser).expect("inserted above") = l - points;
        Ok(points)
    }
}

/// Pure form of [`RatingState::apply`].
pub fn apply_vote(state: &RatingState, event: &VoteEvent, config: &EloConfig) -> Result<RatingState> {
    config.validate()?;
    let mut next = state.clone();
    next.apply(event, config)?;
    Ok(next)
}

/// Replay options beyond the Elo config.
#[derive(Default)]
pub struct ReplayOptions<'a> {
    /// Stop at the first vote stamped after this instant.
    pub cutoff: Option<DateTime<Utc>>,
    /// Start from this state instead of an empty one.
    pub seed: Option<RatingState>,
    /// Votes rejected by the filter advance the cursor without scoring.
    pub filter: Option<&'a dyn Fn(&VoteEvent) -> bool>,
}

/// Folds `apply_vote` over a seq-ordered, gapless log.
pub fn replay(log: &[VoteEvent], config: &EloConfig, cutoff: Option<DateTime<Utc>>) -> Result<RatingState> {
    replay_with(
        log,
        config,
        ReplayOptions {
            cutoff,
            ..Default::default()
        },
    )
}

pub fn replay_with(log: &[VoteEvent], config: &EloConfig, options: ReplayOptions<'_>) -> Result<RatingState> {
    config.validate()?;
    check_log_order(log)?;
    let mut state = options.seed.unwrap_or_default();
    let resume_after = state.last_applied;
    for event in log.iter().skip_while(|e| e.seq <= resume_after) {
        if options.cutoff.is_some_and(|c| event.timestamp > c) {
            break;
        }
        match options.filter {
            Some(keep) if !keep(event) => state.skip(event)?,
            _ => {
                state.apply(event, config)?;
            }
        }
    }
    Ok(state)
}

/// Seq must run 1, 2, 3, ... and timestamps must never go backwards.
pub fn check_log_order(log: &[VoteEvent]) -> Result<()> {
    for (i, pair) in log.windows(2).enumerate() {
        if pair[1].seq != pair[0].seq + 1 {
            return Err(Error::ReplayOrder {
                expected: pair[0].seq + 1,
                found: pair[1].seq,
            });
        }
        if pair[1].timestamp < pair[0].timestamp {
            return Err(Error::Contract(format!(
                "vote {} timestamp precedes vote {} (row {})",
                pair[1].seq,
                pair[0].seq,
                i + 2
            )));
        }
    }
    match log.first() {
        Some(first) if first.seq != 1 => Err(Error::ReplayOrder {
            expected: 1,
            found: first.seq,
        }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFirm {
    pub firm_id: FirmId,
    pub rating: f64,
    pub rank: usize,
}

/// Descending by rating, ties broken by firm id; ranks 1..=n.
pub fn snapshot_ranking(state: &RatingState) -> Vec<RankedFirm> {
    let mut rows: Vec<(&FirmId, f64)> = state.scores.iter().map(|(id, r)| (id, *r)).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    rows.into_iter()
        .enumerate()
        .map(|(i, (id, rating))| RankedFirm {
            firm_id: id.clone(),
            rating,
            rank: i + 1,
        })
        .collect()
}

/// Writes `rank,firm_id,ticker,rating` with ratings at 4 decimals.
/// Firms missing from the universe get an empty ticker.
pub fn write_ranking_csv<W: Write>(writer: W, ranking: &[RankedFirm], universe: Option<&FirmUniverse>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["rank", "firm_id", "ticker", "rating"])?;
    for row in ranking {
        let ticker = universe
            .and_then(|u| u.get(&row.firm_id))
            .map(|f| f.ticker.as_str())
            .unwrap_or("");
        wtr.write_record([
            row.rank.to_string(),
            row.firm_id.to_string(),
            ticker.to_owned(),
            format!("{:.4}", row.rating),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct RankingRecord {
    rank: usize,
    firm_id: String,
    #[allow(dead_code)]
    ticker: String,
    rating: f64,
}

/// Reads a ranking CSV as written by [`write_ranking_csv`], skipping `#` lines.
pub fn read_ranking_csv<R: Read>(reader: R) -> Result<Vec<RankedFirm>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<RankingRecord>() {
        let rec = rec?;
        out.push(RankedFirm {
            firm_id: FirmId(rec.firm_id),
            rating: rec.rating,
            rank: rec.rank,
        });
    }
    Ok(out)
}
