use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fluxlim_bench::indicator_fixture;
use fluxlim_core::diagnostics::{check_lemma6, phi, psi};
use fluxlim_core::MomentConfig;

fn bench_moments(c: &mut Criterion) {
    let mut group = c.benchmark_group("moments");
    for cells in [1024usize, 8192] {
        let (params, grid, w0) = indicator_fixture(cells, 0.3, 2.0);
        let cfg = MomentConfig::new(0.35, 1e-3, &params).unwrap();
        group.bench_with_input(BenchmarkId::new("phi", cells), &cells, |b, _| {
            b.iter(|| phi(black_box(&w0), &cfg, &params, &grid).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("psi", cells), &cells, |b, _| {
            b.iter(|| psi(black_box(&w0), &cfg, &params, &grid).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("lemma6", cells), &cells, |b, _| {
            b.iter(|| check_lemma6(black_box(&w0), &cfg, &params, &grid).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_moments);
criterion_main!(benches);
