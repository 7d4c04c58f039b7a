use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fluxlim_bench::indicator_fixture;
use fluxlim_core::solver_w::{integrate, WSolver};
use fluxlim_core::SolverControls;

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("w_step");
    for cells in [256usize, 1024, 4096] {
        let (params, grid, w0) = indicator_fixture(cells, 0.3, 2.0);
        let controls = SolverControls::default();
        let mut solver = WSolver::new(&params, &grid).unwrap();
        let dt = solver.adaptive_dt(&w0, &controls);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &cells, |b, _| {
            b.iter(|| solver.step(black_box(&w0), dt, &controls).unwrap())
        });
    }
    group.finish();
}

fn bench_integrate(c: &mut Criterion) {
    let (params, grid, w0) = indicator_fixture(256, 0.3, 2.0);
    let controls = SolverControls {
        t_end: 0.01,
        ..SolverControls::default()
    };
    c.bench_function("integrate_256_to_0.01", |b| {
        b.iter(|| integrate(black_box(&w0), &params, &grid, &controls).unwrap())
    });
}

criterion_group!(benches, bench_step, bench_integrate);
criterion_main!(benches);
