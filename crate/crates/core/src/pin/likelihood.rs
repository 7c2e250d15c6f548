use statrs::function::factorial::ln_factorial;

use super::{PinParams, TradeDay};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// `e^{-lambda} lambda^n / n!` evaluated literally. Overflows to a
/// non-finite value for large `n`.
pub fn poisson_pmf_direct(n: u64, lambda: f64) -> f64 {
    let factorial: f64 = (1..=n).map(|i| i as f64).product();
    (-lambda).exp() * lambda.powf(n as f64) / factorial
}

/// Probability of one day's `(B, S)` under the three-branch mixture.
pub fn day_likelihood_direct(day: &TradeDay, theta: &PinParams) -> Result<f64> {
    theta.validate()?;
    let PinParams {
        mu,
        eps_b,
        eps_s,
        alpha,
        delta,
    } = *theta;
    let (b, s) = (day.buys, day.sells);
    let good = alpha * delta * poisson_pmf_direct(b, mu + eps_b) * poisson_pmf_direct(s, eps_s);
    let bad = alpha * (1.0 - delta) * poisson_pmf_direct(b, eps_b) * poisson_pmf_direct(s, mu + eps_s);
    let none = (1.0 - alpha) * poisson_pmf_direct(b, eps_b) * poisson_pmf_direct(s, eps_s);
    Ok(good + bad + none)
}

/// Log-likelihood of a set of days in the factored form: the common factor
/// `e^{-eps_b-eps_s} (x_b x_s)^M (mu+eps_b)^B (mu+eps_s)^S / (B! S!)` is pulled
/// out of each day, with `M = min(B,S) + max(B,S)/2`, and the remaining
/// three-branch mixture is summed with log-sum-exp. Equal to the sum of the
/// logs of [`day_likelihood_direct`], but finite for counts in the 10^5 range.
pub fn log_likelihood_factorized(days: &[TradeDay], theta: &PinParams) -> Result<f64> {
    theta.validate()?;
    if days.is_empty() {
        return Err(Error::Contract("log-likelihood needs at least one trade day".into()));
    }
    let PinParams {
        mu,
        eps_b,
        eps_s,
        alpha,
        delta,
    } = *theta;
    let ln_xb = theta.x_b().ln();
    let ln_xs = theta.x_s().ln();
    let ln_buy_rate = (mu + eps_b).ln();
    let ln_sell_rate = (mu + eps_s).ln();
    let ln_good = alpha.ln() + delta.ln() - mu;
    let ln_bad = alpha.ln() + (1.0 - delta).ln() - mu;
    let ln_none = (1.0 - alpha).ln();

    let mut total = 0.0;
    for day in days {
        let b = day.buys as f64;
        let s = day.sells as f64;
        let m = b.min(s) + b.max(s) / 2.0;
        let common = -eps_b - eps_s + m * (ln_xb + ln_xs) + b * ln_buy_rate + s * ln_sell_rate
            - ln_factorial(day.buys)
            - ln_factorial(day.sells);
        let mixture = log_sum_exp(&[
            ln_good - m * ln_xb + (s - m) * ln_xs,
            ln_bad + (b - m) * ln_xb - m * ln_xs,
            ln_none + (b - m) * ln_xb + (s - m) * ln_xs,
        ]);
        total += common + mixture;
    }
    if !total.is_finite() {
        return Err(Error::NumericalOverflow(format!(
            "log-likelihood evaluated to {total} for {theta:?}"
        )));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn day(b: u64, s: u64) -> TradeDay {
        TradeDay::new(NaiveDate::from_ymd_opt(2017, 3, 1).unwrap(), b, s)
    }

    #[test]
    fn hand_evaluated_zero_day() {
        let theta = PinParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
        let v = day_likelihood_direct(&day(0, 0), &theta).unwrap();
        let expected = (-2.0f64).exp() * (0.5 + 0.5 * (-1.0f64).exp());
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.092561176).abs() < 1e-9);
    }

    #[test]
    fn no_event_model_is_two_independent_poissons() {
        let theta = PinParams::new(7.0, 3.0, 4.5, 0.0, 0.3).unwrap();
        for (b, s) in [(0, 0), (3, 5), (12, 1)] {
            let v = day_likelihood_direct(&day(b, s), &theta).unwrap();
            let expected = poisson_pmf_direct(b, 3.0) * poisson_pmf_direct(s, 4.5);
            assert!((v - expected).abs() <= 1e-15 * expected.max(1e-300));
        }
        let days = [day(3, 5), day(12, 1), day(0, 0)];
        let ll = log_likelihood_factorized(&days, &theta).unwrap();
        let independent: f64 = days
            .iter()
            .map(|d| poisson_pmf_direct(d.buys, 3.0).ln() + poisson_pmf_direct(d.sells, 4.5).ln())
            .sum();
        assert!((ll - independent).abs() < 1e-10);
    }

    #[test]
    fn factorized_matches_direct_on_small_counts() {
        let theta = PinParams::new(4.0, 2.5, 3.0, 0.35, 0.6).unwrap();
        let days: Vec<_> = [(0, 0), (1, 7), (9, 2), (20, 20), (0, 13)]
            .iter()
            .map(|&(b, s)| day(b, s))
            .collect();
        let direct: f64 = days
            .iter()
            .map(|d| day_likelihood_direct(d, &theta).unwrap().ln())
            .sum();
        let fact = log_likelihood_factorized(&days, &theta).unwrap();
        assert!((direct - fact).abs() < 1e-9, "{direct} vs {fact}");
    }

    #[test]
    fn large_counts_stay_finite_where_direct_form_breaks() {
        let theta = PinParams::new(500.0, 4800.0, 4800.0, 0.3, 0.5).unwrap();
        let d = day(5000, 5000);
        assert!(!day_likelihood_direct(&d, &theta).unwrap().is_finite());
        let ll = log_likelihood_factorized(&[d], &theta).unwrap();
        assert!(ll.is_finite() && ll < 0.0);
        let ll = log_likelihood_factorized(&[day(100_000, 90_000)], &theta).unwrap();
        assert!(ll.is_finite());
    }

    #[test]
    fn relabeling_symmetry() {
        let theta = PinParams::new(6.0, 2.0, 5.0, 0.4, 0.7).unwrap();
        let mirrored = PinParams::new(6.0, 5.0, 2.0, 0.4, 0.3).unwrap();
        let days = [day(4, 11), day(0, 3), day(8, 8)];
        let swapped: Vec<_> = days.iter().map(|d| day(d.sells, d.buys)).collect();
        let a = log_likelihood_factorized(&days, &theta).unwrap();
        let b = log_likelihood_factorized(&swapped, &mirrored).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_invalid() {
        let theta = PinParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
        assert!(matches!(
            log_likelihood_factorized(&[], &theta),
            Err(Error::Contract(_))
        ));
        let bad = PinParams { alpha: 2.0, ..theta };
        assert!(matches!(day_likelihood_direct(&day(1, 1), &bad), Err(Error::Domain(_))));
        assert!(matches!(
            log_likelihood_factorized(&[day(1, 1)], &bad),
            Err(Error::Domain(_))
        ));
    }
}
