//! Benchmarks for the data-parallel entry points, comparing the rayon
//! fan-out against the always-available sequential twins, plus the exact
//! round for scale reference.
//!
//! Build with the default `parallel` feature to compare both schedulers;
//! without it, `monte_carlo_round` and `sweep_binary_fidelity` fall back to
//! the sequential implementations and the pairs coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mepp_core::ghz::GhzMixture;
use mepp_core::protocol::{
    monte_carlo_round, monte_carlo_round_sequential, simulate_round_exact, sweep_binary_fidelity,
    sweep_binary_fidelity_sequential, ErrorMode, RoundConfig,
};

fn bench_monte_carlo(c: &mut Criterion) {
    let input = GhzMixture::binary_bit_flip(3, 0.8).unwrap();
    let cfg = RoundConfig::new(3, ErrorMode::BitFlip).with_seed(17);
    let mut group = c.benchmark_group("monte_carlo_round");
    for trials in [2_000usize, 10_000] {
        group.bench_with_input(
            BenchmarkId::new("parallel", trials),
            &trials,
            |b, &trials| b.iter(|| monte_carlo_round(&input, &cfg, trials).unwrap()),
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", trials),
            &trials,
            |b, &trials| b.iter(|| monte_carlo_round_sequential(&input, &cfg, trials).unwrap()),
        );
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    let mut group = c.benchmark_group("sweep_binary_fidelity");
    group.bench_function("parallel", |b| {
        b.iter(|| sweep_binary_fidelity(3, &grid).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| sweep_binary_fidelity_sequential(3, &grid).unwrap())
    });
    group.finish();
}

fn bench_exact_round(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_round_exact");
    group.sample_size(10);
    for n in [2usize, 3, 4] {
        let input = GhzMixture::binary_bit_flip(n, 0.8).unwrap();
        let cfg = RoundConfig::new(n, ErrorMode::BitFlip);
        group.bench_with_input(BenchmarkId::new("bit_flip", n), &n, |b, _| {
            b.iter(|| simulate_round_exact(&input, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_monte_carlo, bench_sweep, bench_exact_round);
criterion_main!(benches);
