use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{PinParams, TradeDay};
use crate::error::Result;

fn draw_poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("positive finite rate");
    dist.sample(rng) as u64
}

/// Simulates `n_days` independent trading days. Dates count forward from
/// 2000-01-03 one calendar day at a time; only the counts matter.
pub fn simulate_trades(theta: &PinParams, n_days: usize, seed: u64) -> Result<Vec<TradeDay>> {
    theta.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    let days = (0..n_days)
        .map(|i| {
            let u: f64 = rng.random();
            let (buy_rate, sell_rate) = if u < theta.alpha * theta.delta {
                (theta.mu + theta.eps_b, theta.eps_s)
            } else if u < theta.alpha {
                (theta.eps_b, theta.mu + theta.eps_s)
            } else {
                (theta.eps_b, theta.eps_s)
            };
            let buys = draw_poisson(&mut rng, buy_rate);
            let sells = draw_poisson(&mut rng, sell_rate);
            TradeDay::new(start + chrono::Duration::days(i as i64), buys, sells)
        })
        .collect();
    Ok(days)
}
