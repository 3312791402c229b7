//! Per-kernel timings. With the `parallel` feature each kernel runs on the
//! global rayon pool and on a one-thread pool; without it only `seq` is
//! measured.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use slagflow::ambient::{CalabiField, CalabiModelSpec, ProfileId, SyntheticTYPerturbation};
use slagflow::lagmesh::{build_model_slag, measure, ImmersedLagrangian, Laplacian, MeasureOptions, SlagModelSpec};
use slagflow::lmcf::lmcf_step;
use slagflow::moser::{transport, SymplecticPair, TransportOptions};
use std::f64::consts::TAU;
use std::hint::black_box;

fn model(m: usize) -> (CalabiField, ImmersedLagrangian) {
    let spec = CalabiModelSpec::square(2, TAU).unwrap();
    let lag = build_model_slag(&spec, &SlagModelSpec::new((-16f64).exp(), [1, 0], [m, m])).unwrap();
    (CalabiField::new(spec), lag)
}

#[cfg(feature = "parallel")]
fn modes() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("par", None), ("seq", Some(one))]
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(&'static str, Option<()>)> {
    vec![("seq", None)]
}

#[cfg(feature = "parallel")]
fn run_in<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_in<R>(_: &Option<()>, f: impl FnOnce() -> R) -> R {
    f()
}

fn kernels(c: &mut Criterion) {
    let (f, lag) = model(48);
    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for (name, pool) in modes() {
        g.bench_function(BenchmarkId::new("measure_48", name), |b| {
            b.iter(|| run_in(&pool, || black_box(measure(&f, &lag, &MeasureOptions::quick()).unwrap())))
        });
        g.bench_function(BenchmarkId::new("laplacian_48", name), |b| {
            b.iter(|| run_in(&pool, || black_box(Laplacian::assemble(&f, &lag).unwrap())))
        });
        g.bench_function(BenchmarkId::new("lmcf_step_48", name), |b| {
            b.iter(|| run_in(&pool, || black_box(lmcf_step(&f, &lag, 1e-3).unwrap())))
        });
    }
    let (_, small) = model(16);
    let pair =
        SymplecticPair::synthetic(f.clone(), SyntheticTYPerturbation::new(0.05, 0.1, ProfileId::Twist, 11)).unwrap();
    let opts = TransportOptions { steps: 4, snapshots: 1, error_estimate: false };
    for (name, pool) in modes() {
        g.bench_function(BenchmarkId::new("transport_16_4steps", name), |b| {
            b.iter(|| run_in(&pool, || black_box(transport(&pair, &small, &opts).unwrap())))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
