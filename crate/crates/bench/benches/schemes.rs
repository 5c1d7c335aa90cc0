use std::hint::black_box;

use cirbench::experiments::strong_error_proxy;
use cirbench::rng::StreamKey;
use cirbench::schemes::{exact_step, simulate_coupled, simulate_path};
use cirbench::theory::{nu_bar, sequence_iter};
use cirbench::{CirParams, Grid, SchemeKind};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn fig1h() -> CirParams {
    CirParams::new(0.02, 64.0, 0.02, 0.8, 1.0).unwrap()
}

fn bench_paths(c: &mut Criterion) {
    let params = fig1h();
    let mut group = c.benchmark_group("path");
    for steps in [64usize, 512] {
        let grid = Grid::new(1.0, steps).unwrap();
        group.throughput(Throughput::Elements(steps as u64));
        for kind in SchemeKind::ALL {
            group.bench_with_input(BenchmarkId::new(kind.name(), steps), &grid, |b, grid| {
                let mut i = 0;
                b.iter(|| {
                    i += 1;
                    simulate_path(kind, &params, grid, StreamKey::brownian(1, i)).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn bench_coupled(c: &mut Criterion) {
    let params = fig1h();
    let grid = Grid::new(1.0, 256).unwrap();
    c.bench_function("coupled_256_x8", |b| {
        let mut i = 0;
        b.iter(|| {
            i += 1;
            simulate_coupled(&params, &grid, 8, StreamKey::brownian(1, i)).unwrap()
        })
    });
    c.bench_function("proxy_256_4096_paths", |b| {
        b.iter(|| strong_error_proxy(&params, 256, 1.0, 4096, 3).unwrap())
    });
}

fn bench_exact_step(c: &mut Criterion) {
    let params = fig1h();
    let mut group = c.benchmark_group("exact_step");
    for delta in [1.0 / 16.0, 1.0] {
        group.bench_with_input(BenchmarkId::from_parameter(delta), &delta, |b, &delta| {
            let mut stream = StreamKey::transition(5, 0).stream();
            b.iter(|| exact_step(black_box(params.v0), delta, &params, &mut stream))
        });
    }
    group.finish();
}

fn bench_theory(c: &mut Criterion) {
    c.bench_function("nu_bar_3", |b| b.iter(|| nu_bar(black_box(3.0)).unwrap()));
    c.bench_function("sequences_10k", |b| {
        b.iter(|| {
            sequence_iter(0.4999, 0.2, 1e-4, 10_000)
                .unwrap()
                .map(|t| t.c)
                .sum::<f64>()
        })
    });
}

criterion_group!(
    benches,
    bench_paths,
    bench_coupled,
    bench_exact_step,
    bench_theory
);
criterion_main!(benches);
