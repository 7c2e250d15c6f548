use serde::{Deserialize, Serialize};

use super::spearman::{spearman_rho, Ranking};
use crate::elo::{replay_with, EloConfig, RatingState, ReplayOptions};
use crate::error::{Error, Result};
use crate::votes::VoteEvent;
use crate::waves::{validate_waves, WaveCut};

/// The k-factor grid examined for the published index.
pub const DEFAULT_K_GRID: [f64; 5] = [16.0, 24.0, 36.0, 64.0, 80.0];

/// Rank stability of the index across waves for each candidate k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweep {
    pub k_values: Vec<f64>,
    pub waves: Vec<String>,
    /// `consecutive[i][j]`: rho between waves `j` and `j + 1` under `k_values[i]`.
    pub consecutive: Vec<Vec<f64>>,
    pub mean_rho: Vec<f64>,
    /// `cross_k[i][j]`: rho between the final-wave rankings under `k_values[i]`
    /// and `k_values[j]`.
    pub cross_k: Vec<Vec<f64>>,
    /// The k with the highest mean inter-wave rho; ties go to the smaller k.
    pub recommended_k: f64,
}

/// Replays the log once per k and wave and compares the wave rankings.
/// `base` supplies the initial rating and expectation mode; `seed`, when
/// given, is the starting state (typically the whole universe at the
/// initial rating). Replays for different k run on separate threads.
pub fn sweep_k(
    log: &[VoteEvent],
    k_values: &[f64],
    waves: &[WaveCut],
    base: &EloConfig,
    seed: Option<&RatingState>,
) -> Result<KSweep> {
    if waves.len() < 2 {
        return Err(Error::Domain(format!(
            "k sweep needs at least two waves, got {}",
            waves.len()
        )));
    }
    if k_values.is_empty() {
        return Err(Error::Contract("no k values to sweep".into()));
    }
    validate_waves(waves)?;

    let rankings_for = |k: f64| -> Result<Vec<Ranking>> {
        let config = EloConfig { k_factor: k, ..*base };
        config.validate()?;
        waves
            .iter()
            .map(|w| {
                let state = replay_with(
                    log,
                    &config,
                    ReplayOptions {
                        cutoff: Some(w.cutoff),
                        seed: seed.cloned(),
                        filter: None,
                    },
                )?;
                Ok(Ranking::from_scores(state.scores.iter().map(|(id, r)| (id, *r))))
            })
            .collect()
    };
    let per_k: Vec<Vec<Ranking>> = std::thread::scope(|scope| {
        let handles: Vec<_> = k_values.iter().map(|&k| scope.spawn(move || rankings_for(k))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect::<Result<_>>()
    })?;

    let mut consecutive = Vec::with_capacity(k_values.len());
    for rankings in &per_k {
        let rhos = rankings
            .windows(2)
            .map(|w| spearman_rho(&w[0], &w[1]))
            .collect::<Result<Vec<_>>>()?;
        consecutive.push(rhos);
    }
    let mean_rho: Vec<f64> = consecutive
        .iter()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect();

    let last = waves.len() - 1;
    let cross_k = per_k
        .iter()
        .map(|a| {
            per_k
                .iter()
                .map(|b| spearman_rho(&a[last], &b[last]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for i in 1..k_values.len() {
        let better = mean_rho[i] > mean_rho[best] || (mean_rho[i] == mean_rho[best] && k_values[i] < k_values[best]);
        if better {
            best = i;
        }
    }

    Ok(KSweep {
        k_values: k_values.to_vec(),
        waves: waves.iter().map(|w| w.name.clone()).collect(),
        consecutive,
        mean_rho,
        cross_k,
        recommended_k: k_values[best],
    })
}
