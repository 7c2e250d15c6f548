use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use iai_core::elo::{replay, snapshot_ranking, EloConfig};
use iai_core::pin::{estimate_pin, log_likelihood_factorized, simulate_trades, PinOptions, PinParams};
use iai_core::synthetic::{elimination_fixture, latent_order_log, LatentLogSpec, FULL_MODEL};
use iai_core::validation::{backward_eliminate, ols_fit, DEFAULT_P_THRESHOLD};

fn bench_replay(c: &mut Criterion) {
    let mut group = c.benchmark_group("elo_replay");
    for n_votes in [1_000usize, 10_000, 50_000] {
        let log = latent_order_log(&LatentLogSpec::new(116, n_votes, 0.05, 42));
        let config = EloConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(n_votes), &log, |b, log| {
            b.iter(|| snapshot_ranking(&replay(black_box(log), &config, None).unwrap()))
        });
    }
    group.finish();
}

fn bench_pin(c: &mut Criterion) {
    let theta = PinParams::new(60.0, 40.0, 40.0, 0.4, 0.5).unwrap();
    let days = simulate_trades(&theta, 250, 1).unwrap();
    c.bench_function("pin_loglik_250_days", |b| {
        b.iter(|| log_likelihood_factorized(black_box(&days), &theta).unwrap())
    });
    let mut group = c.benchmark_group("pin_estimate");
    group.sample_size(10);
    group.bench_function("250_days", |b| {
        b.iter(|| estimate_pin(black_box(&days), &PinOptions::default()).unwrap())
    });
    group.finish();
}

fn bench_regression(c: &mut Criterion) {
    let fixture = elimination_fixture(42).unwrap();
    c.bench_function("ols_full_model", |b| {
        b.iter(|| ols_fit(black_box(&fixture.rows), "ranking", &FULL_MODEL).unwrap())
    });
    c.bench_function("backward_elimination", |b| {
        b.iter(|| backward_eliminate(black_box(&fixture.rows), "ranking", &FULL_MODEL, DEFAULT_P_THRESHOLD).unwrap())
    });
}

criterion_group!(benches, bench_replay, bench_pin, bench_regression);
criterion_main!(benches);
