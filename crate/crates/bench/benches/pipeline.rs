use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mutscope_bench::{coverage_pair, kill_vector, prioritize_workload};
use mutscope_core::coverage::count_distance;
use mutscope_core::prioritize::prioritize_and_reduce;
use mutscope_core::sampler::{fsci_loop, SamplingConfig};
use mutscope_core::stats::clopper_pearson;
use mutscope_core::DistanceMetric;

fn intervals(c: &mut Criterion) {
    let mut g = c.benchmark_group("clopper_pearson");
    for n in [50u64, 500, 5000] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| clopper_pearson(black_box(n * 7 / 10), n, 0.95).unwrap())
        });
    }
    g.finish();
}

fn distances(c: &mut Criterion) {
    let (a, b) = coverage_pair(500, 1);
    let mut g = c.benchmark_group("count_distance");
    for metric in DistanceMetric::ALL {
        g.bench_function(format!("{metric:?}"), |bench| {
            bench.iter(|| count_distance(black_box(&a), black_box(&b), metric))
        });
    }
    g.finish();
}

fn prioritize(c: &mut Criterion) {
    let mut g = c.benchmark_group("prioritize_and_reduce");
    for tests in [10usize, 100, 400] {
        let w = prioritize_workload(tests, 200, 7);
        g.bench_with_input(BenchmarkId::from_parameter(tests), &w, |b, w| {
            b.iter(|| prioritize_and_reduce(&w.mutant, &w.tests, &w.coverage, DistanceMetric::Cosine, 0).unwrap())
        });
    }
    g.finish();
}

fn fsci(c: &mut Criterion) {
    let kills = kill_vector(5000, 0.7, 3);
    let cfg = SamplingConfig { t_ci: 0.10, ..Default::default() };
    c.bench_function("fsci_loop", |b| {
        b.iter(|| fsci_loop(0..kills.len(), |i| Some(kills[*i]), &cfg, None).unwrap())
    });
}

criterion_group!(benches, intervals, distances, prioritize, fsci);
criterion_main!(benches);
