use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_likelihood_factorized, PinParams, TradeDay};
use crate::error::{Error, Result};
use crate::numeric::{logit, mean, sigmoid};
use crate::optim::{nelder_mead, NelderMeadOptions};

const START_PROBABILITIES: [f64; 3] = [0.2, 0.5, 0.8];
const MIN_START_RATE: f64 = 0.1;
const RECOMMENDED_DAYS: usize = 20;

#[derive(Debug, Clone)]
pub struct PinOptions {
    /// Seeds the jitter applied to each start's initial simplex.
    pub seed: u64,
    /// Iteration budget per start.
    pub max_iter: usize,
    /// Absolute log-likelihood tolerance.
    pub f_tol: f64,
    /// Relative jitter of the initial simplex steps, in `[0, 1)`.
    pub jitter: f64,
}

impl Default for PinOptions {
    fn default() -> Self {
        PinOptions {
            seed: 42,
            max_iter: 500,
            f_tol: 1e-8,
            jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinFit {
    pub params: PinParams,
    pub pin: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub starts_tried: usize,
    /// Fewer days than recommended, or no variation across days.
    pub low_confidence: bool,
}

fn to_unconstrained(p: &PinParams) -> [f64; 5] {
    [p.mu.ln(), p.eps_b.ln(), p.eps_s.ln(), logit(p.alpha), logit(p.delta)]
}

fn from_unconstrained(z: &[f64]) -> PinParams {
    PinParams {
        mu: z[0].exp(),
        eps_b: z[1].exp(),
        eps_s: z[2].exp(),
        alpha: sigmoid(z[3]),
        delta: sigmoid(z[4]),
    }
}

/// The start grid: every `(alpha, delta)` in `{0.2, 0.5, 0.8}^2`, with the
/// uninformed rates at the mean counts and `mu` at the mean absolute order
/// imbalance. All rates are floored at 0.1.
pub fn start_grid(days: &[TradeDay]) -> Vec<PinParams> {
    let buys: Vec<f64> = days.iter().map(|d| d.buys as f64).collect();
    let sells: Vec<f64> = days.iter().map(|d| d.sells as f64).collect();
    let imbalance: Vec<f64> = buys.iter().zip(&sells).map(|(b, s)| (b - s).abs()).collect();
    let eps_b = mean(&buys).max(MIN_START_RATE);
    let eps_s = mean(&sells).max(MIN_START_RATE);
    let mu = mean(&imbalance).max(MIN_START_RATE);
    let mut starts = Vec::with_capacity(9);
    for &alpha in &START_PROBABILITIES {
        for &delta in &START_PROBABILITIES {
            starts.push(PinParams {
                mu,
                eps_b,
                eps_s,
                alpha,
                delta,
            });
        }
    }
    starts
}

/// Maximum-likelihood PIN by multi-start Nelder-Mead over log/logit
/// transformed parameters. The best start wins; ties keep the earlier start.
pub fn estimate_pin(days: &[TradeDay], options: &PinOptions) -> Result<PinFit> {
    if days.is_empty() {
        return Err(Error::DegenerateInput("no trade days".into()));
    }
    if days.iter().all(|d| d.buys == 0 && d.sells == 0) {
        return Err(Error::DegenerateInput(
            "every trade day has zero buys and zero sells".into(),
        ));
    }
    let identical = days.iter().all(|d| d.buys == days[0].buys && d.sells == days[0].sells);
    let low_confidence = days.len() < RECOMMENDED_DAYS || identical;
    if days.len() < RECOMMENDED_DAYS {
        warn!(
            "estimating PIN from {} days; at least {RECOMMENDED_DAYS} recommended",
            days.len()
        );
    }

    let objective = |z: &[f64]| match log_likelihood_factorized(days, &from_unconstrained(z)) {
        Ok(ll) => -ll,
        Err(_) => f64::INFINITY,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let starts = start_grid(days);
    let mut best: Option<(PinParams, f64, bool)> = None;
    let mut diagnostics = Vec::new();
    for (i, start) in starts.iter().enumerate() {
        let initial_step = (0..5)
            .map(|_| 0.5 * (1.0 + options.jitter * rng.random_range(-1.0..1.0)))
            .collect();
        let nm = NelderMeadOptions {
            max_iter: options.max_iter,
            f_tol: options.f_tol,
            initial_step,
        };
        let result = nelder_mead(objective, &to_unconstrained(start), &nm);
        let params = from_unconstrained(&result.x);
        let ll = -result.f;
        let usable = ll.is_finite() && params.validate().is_ok();
        diagnostics.push(format!(
            "start {i} (alpha={}, delta={}): loglik={ll:.6}, iterations={}, converged={}",
            start.alpha, start.delta, result.iterations, result.converged
        ));
        if !usable {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, best_ll, _)) => ll > *best_ll,
        };
        if better {
            best = Some((params, ll, result.converged));
        }
    }

    match best {
        Some((params, log_likelihood, converged)) => {
            if !converged {
                warn!(
                    "best PIN start did not reach tolerance {} in {} iterations",
                    options.f_tol, options.max_iter
                );
            }
            Ok(PinFit {
                pin: params.pin(),
                params,
                log_likelihood,
                converged,
                starts_tried: starts.len(),
                low_confidence,
            })
        }
        None => Err(Error::EstimationFailure(diagnostics)),
    }
}

/// Row of the trade-count input `firm_id,date,buys,sells`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeRecord {
    pub firm_id: String,
    pub date: NaiveDate,
    pub buys: u64,
    pub sells: u64,
}

/// Groups trade rows by firm, each firm's days sorted by date.
pub fn read_trade_days<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<TradeDay>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out: BTreeMap<String, Vec<TradeDay>> = BTreeMap::new();
    for rec in rdr.deserialize::<TradeRecord>() {
        let rec = rec?;
        out.entry(rec.firm_id)
            .or_default()
            .push(TradeDay::new(rec.date, rec.buys, rec.sells));
    }
    for (firm, days) in out.iter_mut() {
        days.sort_by_key(|d| d.date);
        if days.windows(2).any(|w| w[0].date == w[1].date) {
            return Err(Error::DataQuality(format!("firm {firm} has duplicate trade dates")));
        }
    }
    Ok(out)
}

/// Fit output record written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinFitRecord {
    pub firm_id: String,
    pub mu: f64,
    pub eps_b: f64,
    pub eps_s: f64,
    pub alpha: f64,
    pub delta: f64,
    pub pin: f64,
    pub loglik: f64,
    pub converged: bool,
    pub starts_tried: usize,
}

impl PinFitRecord {
    pub fn new(firm_id: impl Into<String>, fit: &PinFit) -> Self {
        PinFitRecord {
            firm_id: firm_id.into(),
            mu: fit.params.mu,
            eps_b: fit.params.eps_b,
            eps_s: fit.params.eps_s,
            alpha: fit.params.alpha,
            delta: fit.params.delta,
            pin: fit.pin,
            loglik: fit.log_likelihood,
            converged: fit.converged,
            starts_tried: fit.starts_tried,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pin::simulate_trades;

    #[test]
    fn start_grid_follows_sample_moments() {
        let d = |b, s| TradeDay::new(NaiveDate::from_ymd_opt(2017, 1, 2).unwrap(), b, s);
        let starts = start_grid(&[d(10, 4), d(2, 8)]);
        assert_eq!(starts.len(), 9);
        assert_eq!(starts[0].eps_b, 6.0);
        assert_eq!(starts[0].eps_s, 6.0);
        assert_eq!(starts[0].mu, 6.0);
        assert_eq!((starts[1].alpha, starts[1].delta), (0.2, 0.5));

        let flat = start_grid(&[d(3, 3), d(3, 3)]);
        assert_eq!(flat[0].mu, MIN_START_RATE);
    }

    #[test]
    fn recovers_pin_from_simulated_days() {
        let truth = PinParams::new(60.0, 40.0, 40.0, 0.4, 0.5).unwrap();
        let days = simulate_trades(&truth, 250, 3).unwrap();
        let fit = estimate_pin(&days, &PinOptions::default()).unwrap();
        assert!(
            (fit.pin - truth.pin()).abs() < 0.05,
            "pin {} vs {}",
            fit.pin,
            truth.pin()
        );
        assert_eq!(fit.starts_tried, 9);
        assert!(!fit.low_confidence);
        let at_truth = log_likelihood_factorized(&days, &truth).unwrap();
        assert!(fit.log_likelihood >= at_truth - 1e-6);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let truth = PinParams::new(30.0, 20.0, 25.0, 0.3, 0.6).unwrap();
        let days = simulate_trades(&truth, 60, 11).unwrap();
        let a = estimate_pin(&days, &PinOptions::default()).unwrap();
        let b = estimate_pin(&days, &PinOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_inputs() {
        let d = |b, s| TradeDay::new(NaiveDate::from_ymd_opt(2017, 1, 2).unwrap(), b, s);
        assert!(matches!(
            estimate_pin(&[], &PinOptions::default()),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            estimate_pin(&[d(0, 0), d(0, 0)], &PinOptions::default()),
            Err(Error::DegenerateInput(_))
        ));

        let repeated = vec![d(12, 9); 30];
        let fit = estimate_pin(&repeated, &PinOptions::default()).unwrap();
        assert!(fit.low_confidence);
        assert!(fit.pin > 0.0 && fit.pin < 1.0);
    }

    #[test]
    fn trade_csv_groups_by_firm() {
        let csv = "firm_id,date,buys,sells\nB,2017-01-03,5,6\nA,2017-01-04,1,2\nA,2017-01-03,3,4\n";
        let by_firm = read_trade_days(csv.as_bytes()).unwrap();
        assert_eq!(by_firm.len(), 2);
        assert_eq!(by_firm["A"][0].buys, 3);
        let dup = "firm_id,date,buys,sells\nA,2017-01-03,1,2\nA,2017-01-03,3,4\n";
        assert!(matches!(read_trade_days(dup.as_bytes()), Err(Error::DataQuality(_))));
        let negative = "firm_id,date,buys,sells\nA,2017-01-03,-1,2\n";
        assert!(read_trade_days(negative.as_bytes()).is_err());
    }
}
