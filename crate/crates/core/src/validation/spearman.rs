use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::elo::RankedFirm;
use crate::error::{Error, Result};
use crate::firm::FirmId;

/// Firms with 1-based ranks. Tied firms may share a rank value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<(FirmId, f64)>,
}

impl Ranking {
    pub fn new(entries: Vec<(FirmId, f64)>) -> Self {
        Ranking { entries }
    }

    /// Ranks firms by descending score; tied scores share their average rank.
    pub fn from_scores<'a>(scores: impl IntoIterator<Item = (&'a FirmId, f64)>) -> Self {
        let (ids, values): (Vec<FirmId>, Vec<f64>) = scores.into_iter().map(|(id, s)| (id.clone(), -s)).unzip();
        let ranks = average_ranks(&values);
        Ranking {
            entries: ids.into_iter().zip(ranks).collect(),
        }
    }

    pub fn from_snapshot(snapshot: &[RankedFirm]) -> Self {
        Self::from_scores(snapshot.iter().map(|r| (&r.firm_id, r.rating)))
    }

    /// Builds a ranking from firm ids listed best first.
    pub fn from_order<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ranking {
            entries: ids
                .into_iter()
                .enumerate()
                .map(|(i, id)| (FirmId(id.into()), (i + 1) as f64))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// 1-based ranks in ascending order of `values`, ties sharing the mean of the
/// positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// `1 - 6 Σd² / (n(n² - 1))` over the firms both rankings share. Each side is
/// re-ranked within the shared set first, ties taking average ranks.
pub fn spearman_rho(a: &Ranking, b: &Ranking) -> Result<f64> {
    let b_rank: HashMap<&FirmId, f64> = b.entries.iter().map(|(id, r)| (id, *r)).collect();
    let (a_vals, b_vals): (Vec<f64>, Vec<f64>) = a
        .entries
        .iter()
        .filter_map(|(id, r)| b_rank.get(id).map(|rb| (*r, *rb)))
        .unzip();
    let n = a_vals.len();
    if n == 0 {
        return Err(Error::Domain("rankings share no firms".into()));
    }
    if n < 2 {
        return Err(Error::Domain("rank correlation needs at least two shared firms".into()));
    }
    let ra = average_ranks(&a_vals);
    let rb = average_ranks(&b_vals);
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    let n = n as f64;
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}
