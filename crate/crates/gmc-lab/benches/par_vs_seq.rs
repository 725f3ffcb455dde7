//! Rayon map against the sequential fallback on the two hot kernels: batch
//! Hamiltonian evaluation (ensemble construction) and tube survival.
//!
//! `map_collect` returns results in index order in both modes, so the
//! numbers are bit-identical; only the wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gmc_lab::exec;
use gmc_lab::gmc;
use gmc_lab::kernel::build_mollifier;
use gmc_lab::noise::NoiseGrid;
use gmc_lab::paths::sample_brownian_steps;
use gmc_lab::rng::{self, Stream};
use std::hint::black_box;

fn hamiltonian_batch(c: &mut Criterion) {
    let kernel = build_mollifier(1, 1.0 / 64.0).unwrap();
    let steps = 80;
    let grid = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 42, steps).unwrap();
    let n_paths = 512;
    let body = |idx: usize| {
        let id = rng::derive_seed(7, rng::domain::PATHS, idx as u64);
        let mut stream = Stream::new(7, id);
        let p = sample_brownian_steps(1, steps, 0.05, &[0.0], &mut stream);
        gmc::hamiltonian(&p, &grid, &kernel, steps).unwrap()
    };
    let mut group = c.benchmark_group("hamiltonian_batch");
    group.bench_function(BenchmarkId::new("parallel", n_paths), |b| {
        b.iter(|| black_box(exec::map_collect(n_paths, body)))
    });
    group.bench_function(BenchmarkId::new("sequential", n_paths), |b| {
        b.iter(|| black_box(exec::map_collect_seq(n_paths, body)))
    });
    group.finish();
}

fn tube_survival_batch(c: &mut Criterion) {
    let n = 20_000;
    let steps = 400;
    let dt = 0.01f64;
    let sd = dt.sqrt();
    let body = |idx: usize| {
        let mut stream = Stream::new(3, rng::derive_seed(3, rng::domain::PATHS, idx as u64));
        let mut x = 0.0f64;
        for _ in 0..steps {
            x += sd * stream.next_gaussian();
            if x.abs() >= 1.0 {
                return 0u32;
            }
        }
        1u32
    };
    let mut group = c.benchmark_group("tube_survival");
    group.bench_function(BenchmarkId::new("parallel", n), |b| {
        b.iter(|| {
            let v = exec::map_collect(n, body);
            black_box(v.iter().map(|&s| s as u64).sum::<u64>())
        })
    });
    group.bench_function(BenchmarkId::new("sequential", n), |b| {
        b.iter(|| {
            let v = exec::map_collect_seq(n, body);
            black_box(v.iter().map(|&s| s as u64).sum::<u64>())
        })
    });
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = hamiltonian_batch, tube_survival_batch
}
criterion_main!(benches);
