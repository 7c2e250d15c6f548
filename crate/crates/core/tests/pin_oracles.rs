use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iai_core::pin::{
    day_likelihood_direct, estimate_pin, log_likelihood_factorized, simulate_trades, PinOptions, PinParams, TradeDay,
};

fn day(b: u64, s: u64) -> TradeDay {
    TradeDay::new(NaiveDate::from_ymd_opt(2016, 10, 3).unwrap(), b, s)
}

fn random_theta(rng: &mut ChaCha8Rng) -> PinParams {
    PinParams::new(
        rng.random_range(0.05..15.0),
        rng.random_range(0.05..15.0),
        rng.random_range(0.05..15.0),
        rng.random_range(0.01..0.99),
        rng.random_range(0.01..0.99),
    )
    .unwrap()
}

#[test]
fn factorized_equals_sum_of_log_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let theta = random_theta(&mut rng);
        let days: Vec<TradeDay> = (0..rng.random_range(1..6))
            .map(|_| day(rng.random_range(0..=20), rng.random_range(0..=20)))
            .collect();
        let direct: f64 = days
            .iter()
            .map(|d| day_likelihood_direct(d, &theta).unwrap().ln())
            .sum();
        let factorized = log_likelihood_factorized(&days, &theta).unwrap();
        worst = worst.max((direct - factorized).abs());
    }
    assert!(worst <= 1e-9, "max abs difference {worst}");
}

#[test]
fn direct_likelihood_sums_to_one() {
    for theta in [
        PinParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap(),
        PinParams::new(3.0, 2.0, 4.0, 0.3, 0.7).unwrap(),
        PinParams::new(10.0, 5.0, 6.0, 0.8, 0.2).unwrap(),
    ] {
        let mut total = 0.0;
        for b in 0..=200 {
            for s in 0..=200 {
                total += day_likelihood_direct(&day(b, s), &theta).unwrap();
            }
        }
        assert!((total - 1.0).abs() <= 1e-9, "{theta:?}: {total}");
    }
}

#[test]
fn recovers_pin_over_twenty_seeds() {
    let truth = PinParams::new(60.0, 40.0, 40.0, 0.4, 0.5).unwrap();
    let mut errors: Vec<f64> = (0..20)
        .map(|seed| {
            let days = simulate_trades(&truth, 250, seed).unwrap();
            let fit = estimate_pin(
                &days,
                &PinOptions {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            (fit.pin - truth.pin()).abs()
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    let median = (errors[9] + errors[10]) / 2.0;
    assert!(median <= 0.05, "median error {median}, all {errors:?}");
}

#[test]
fn symmetric_no_event_data_gives_small_pin() {
    let theta = PinParams::new(0.0, 40.0, 40.0, 0.0, 0.5).unwrap();
    let days = simulate_trades(&theta, 250, 9).unwrap();
    let fit = estimate_pin(&days, &PinOptions::default()).unwrap();
    assert!(fit.pin < 0.05, "pin {}", fit.pin);
}

#[test]
fn true_parameters_beat_perturbed_on_average() {
    let truth = PinParams::new(30.0, 20.0, 25.0, 0.35, 0.6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut wins = 0;
    let mut margin = 0.0;
    for seed in 0..40 {
        let days = simulate_trades(&truth, 200, seed).unwrap();
        let scale = |v: f64, rng: &mut ChaCha8Rng| v * rng.random_range(0.7..1.3);
        let perturbed = PinParams {
            mu: scale(truth.mu, &mut rng),
            eps_b: scale(truth.eps_b, &mut rng),
            eps_s: scale(truth.eps_s, &mut rng),
            alpha: scale(truth.alpha, &mut rng).min(0.99),
            delta: scale(truth.delta, &mut rng).min(0.99),
        };
        let at_truth = log_likelihood_factorized(&days, &truth).unwrap();
        let at_perturbed = log_likelihood_factorized(&days, &perturbed).unwrap();
        margin += at_truth - at_perturbed;
        if at_truth > at_perturbed {
            wins += 1;
        }
    }
    assert!(margin > 0.0);
    assert!(wins >= 36, "{wins}/40");
}

#[test]
fn pin_rises_with_informed_intensity() {
    let base = PinParams::new(10.0, 20.0, 20.0, 0.2, 0.5).unwrap();
    let mut last = 0.0;
    for (alpha, mu) in [(0.2, 10.0), (0.4, 10.0), (0.4, 30.0), (0.9, 60.0)] {
        let pin = PinParams { alpha, mu, ..base }.pin();
        assert!(pin > last && pin < 1.0);
        last = pin;
    }
}
