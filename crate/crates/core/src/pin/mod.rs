//! Probability of informed trading.
//!
//! Daily buy and sell counts follow a mixture of Poisson arrivals. With
//! probability `alpha` an information event occurs; it is good news with
//! probability `delta`, in which case informed traders add `mu` to the buy
//! intensity, and bad news otherwise, adding `mu` to the sell intensity.
//! Uninformed traders buy at `eps_b` and sell at `eps_s` every day.
//!
//! Note the convention: `delta` is the probability of *good* news here. Some
//! of the literature uses it for bad news instead.

mod estimate;
mod likelihood;
mod simulate;

pub use estimate::{estimate_pin, read_trade_days, PinFit, PinFitRecord, PinOptions, TradeRecord};
pub use likelihood::{day_likelihood_direct, log_likelihood_factorized, poisson_pmf_direct};
pub use simulate::simulate_trades;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeDay {
    pub date: NaiveDate,
    pub buys: u64,
    pub sells: u64,
}

impl TradeDay {
    pub fn new(date: NaiveDate, buys: u64, sells: u64) -> Self {
        TradeDay { date, buys, sells }
    }
}

/// Model parameters `(mu, eps_b, eps_s, alpha, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinParams {
    /// Informed arrival rate, trades per day.
    pub mu: f64,
    pub eps_b: f64,
    pub eps_s: f64,
    /// Daily probability of an information event.
    pub alpha: f64,
    /// Probability an event is good news.
    pub delta: f64,
}

impl PinParams {
    pub fn new(mu: f64, eps_b: f64, eps_s: f64, alpha: f64, delta: f64) -> Result<Self> {
        let p = PinParams {
            mu,
            eps_b,
            eps_s,
            alpha,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Rates must be finite with `mu >= 0` and `eps_b, eps_s > 0`;
    /// probabilities must lie in `[0, 1]`. The boundary cases are the
    /// collapsed models (no informed flow, no events).
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |v: f64| v.is_finite() && v > 0.0;
        let prob_ok = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::Domain(format!("mu must be >= 0, got {}", self.mu)));
        }
        if !rate_ok(self.eps_b) || !rate_ok(self.eps_s) {
            return Err(Error::Domain(format!(
                "uninformed rates must be > 0, got eps_b={} eps_s={}",
                self.eps_b, self.eps_s
            )));
        }
        if !prob_ok(self.alpha) || !prob_ok(self.delta) {
            return Err(Error::Domain(format!(
                "alpha and delta must lie in [0, 1], got alpha={} delta={}",
                self.alpha, self.delta
            )));
        }
        Ok(())
    }

    /// `alpha*mu / (alpha*mu + eps_b + eps_s)`.
    pub fn pin(&self) -> f64 {
        let informed = self.alpha * self.mu;
        informed / (informed + self.eps_b + self.eps_s)
    }

    /// `eps_b / (mu + eps_b)`.
    pub fn x_b(&self) -> f64 {
        self.eps_b / (self.mu + self.eps_b)
    }

    /// `eps_s / (mu + eps_s)`.
    pub fn x_s(&self) -> f64 {
        self.eps_s / (self.mu + self.eps_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pin_ratio() {
        let p = PinParams::new(60.0, 40.0, 40.0, 0.4, 0.5).unwrap();
        assert!((p.pin() - 24.0 / 104.0).abs() < 1e-15);
        assert!((p.pin() - 0.2308).abs() < 1e-4);
    }

    #[test]
    fn pin_monotone_in_informed_flow() {
        let mut last = -1.0;
        for alpha in [0.1, 0.2, 0.4, 0.8] {
            let pin = PinParams::new(50.0, 30.0, 30.0, alpha, 0.5).unwrap().pin();
            assert!(pin > last && pin > 0.0 && pin < 1.0);
            last = pin;
        }
    }

    #[test]
    fn invalid_params_are_domain_errors() {
        assert!(matches!(
            PinParams::new(-1.0, 1.0, 1.0, 0.5, 0.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(PinParams::new(1.0, 0.0, 1.0, 0.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(PinParams::new(1.0, 1.0, 1.0, 1.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(
            PinParams::new(1.0, 1.0, 1.0, 0.5, f64::NAN),
            Err(Error::Domain(_))
        ));
    }
}
