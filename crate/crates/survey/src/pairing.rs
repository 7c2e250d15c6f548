//! Pair scheduling for new sessions.

use std::collections::HashSet;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use iai_core::{FirmId, RatingState};

use crate::error::{Result, ServiceError};
use crate::model::{Pair, MIN_ACTIVE_FIRMS, PAIRS_PER_SESSION};

type Key = (FirmId, FirmId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairingPolicy {
    /// Uniform over unordered pairs, without replacement.
    #[default]
    Uniform,
    /// Random anchor firm, partner with the closest current rating.
    Proximity,
}

impl FromStr for PairingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(PairingPolicy::Uniform),
            "proximity" => Ok(PairingPolicy::Proximity),
            other => Err(format!("unknown pairing policy {other:?} (uniform|proximity)")),
        }
    }
}

fn key(a: &FirmId, b: &FirmId) -> Key {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn orient<R: Rng>(a: &FirmId, b: &FirmId, rng: &mut R) -> Pair {
    if rng.random_bool(0.5) {
        Pair::new(a.clone(), b.clone())
    } else {
        Pair::new(b.clone(), a.clone())
    }
}

/// Draws one session's pairs from `active`. Pairs in `seen` are used only
/// once every unseen pair is exhausted.
pub fn draw_pairs<R: Rng>(
    active: &[FirmId],
    seen: &HashSet<Key>,
    policy: PairingPolicy,
    ratings: &RatingState,
    rng: &mut R,
) -> Result<Vec<Pair>> {
    if active.len() < MIN_ACTIVE_FIRMS {
        return Err(ServiceError::Capacity(format!(
            "{} active firms, need at least {MIN_ACTIVE_FIRMS}",
            active.len()
        )));
    }
    match policy {
        PairingPolicy::Uniform => Ok(uniform(active, seen, rng)),
        PairingPolicy::Proximity => Ok(proximity(active, seen, ratings, rng)),
    }
}

fn uniform<R: Rng>(active: &[FirmId], seen: &HashSet<Key>, rng: &mut R) -> Vec<Pair> {
    let n = active.len();
    let mut taken: HashSet<Key> = HashSet::new();
    let mut pairs = Vec::with_capacity(PAIRS_PER_SESSION);

    // Rejection sampling is cheap while unseen pairs are plentiful.
    'slots: for _ in 0..PAIRS_PER_SESSION {
        for _ in 0..64 {
            let ij = index::sample(rng, n, 2);
            let (a, b) = (&active[ij.index(0)], &active[ij.index(1)]);
            let k = key(a, b);
            if !seen.contains(&k) && !taken.contains(&k) {
                taken.insert(k);
                pairs.push(orient(a, b, rng));
                continue 'slots;
            }
        }
        break;
    }
    if pairs.len() == PAIRS_PER_SESSION {
        return pairs;
    }

    // Dense case: enumerate the remaining unordered pairs.
    let mut fresh = Vec::new();
    let mut stale = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let k = key(&active[i], &active[j]);
            if taken.contains(&k) {
                continue;
            }
            if seen.contains(&k) {
                stale.push((i, j));
            } else {
                fresh.push((i, j));
            }
        }
    }
    fresh.shuffle(rng);
    stale.shuffle(rng);
    for (i, j) in fresh.into_iter().chain(stale).take(PAIRS_PER_SESSION - pairs.len()) {
        pairs.push(orient(&active[i], &active[j], rng));
    }
    pairs.shuffle(rng);
    pairs
}

fn proximity<R: Rng>(active: &[FirmId], seen: &HashSet<Key>, ratings: &RatingState, rng: &mut R) -> Vec<Pair> {
    let rating = |f: &FirmId| ratings.rating(f).unwrap_or(iai_core::elo::DEFAULT_INITIAL_RATING);
    let mut taken: HashSet<Key> = HashSet::new();
    let mut pairs = Vec::with_capacity(PAIRS_PER_SESSION);
    let mut anchors: Vec<&FirmId> = active.iter().collect();

    while pairs.len() < PAIRS_PER_SESSION {
        anchors.shuffle(rng);
        let mut placed = false;
        for allow_seen in [false, true] {
            for anchor in &anchors {
                let mut partners: Vec<&FirmId> = active
                    .iter()
                    .filter(|p| p != anchor)
                    .filter(|p| {
                        let k = key(anchor, p);
                        !taken.contains(&k) && (allow_seen || !seen.contains(&k))
                    })
                    .collect();
                if partners.is_empty() {
                    continue;
                }
                partners.shuffle(rng);
                let r = rating(anchor);
                let best = partners
                    .into_iter()
                    .min_by(|x, y| (rating(x) - r).abs().total_cmp(&(rating(y) - r).abs()))
                    .expect("non-empty");
                taken.insert(key(anchor, best));
                pairs.push(orient(anchor, best, rng));
                placed = true;
                break;
            }
            if placed {
                break;
            }
        }
        // Unreachable with at least five firms, kept as a loop guard.
        if !placed {
            break;
        }
    }
    pairs
}
