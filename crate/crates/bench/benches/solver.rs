use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use grace_bench::fixture;
use grace_core::cv::{kfold_cv, CvOptions, CvPolicy};
use grace_core::{fit_grace, fit_path, lambda1_grid, laplacian, FitOptions, PathParameter, PenaltyConfig};

fn single_fit(c: &mut Criterion) {
    let fx = fixture(50, 1);
    let opts = FitOptions::default();
    let mut group = c.benchmark_group("fit_grace");
    group.sample_size(10);
    for lambda2 in [0.0, 10.0, 1000.0] {
        let cfg = PenaltyConfig::new(200.0, lambda2).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(lambda2), &cfg, |b, cfg| {
            b.iter(|| fit_grace(black_box(&fx.train), &fx.laplacian, cfg, None, &opts).unwrap())
        });
    }
    group.finish();
}

fn warm_path(c: &mut Criterion) {
    let fx = fixture(50, 2);
    let grid = lambda1_grid(&fx.train, 0.01, 30).unwrap();
    let opts = FitOptions::default();
    let mut group = c.benchmark_group("fit_path");
    group.sample_size(10);
    group.bench_function("lambda2=10", |b| {
        b.iter(|| fit_path(black_box(&fx.train), &fx.laplacian, PathParameter::Lambda1 { lambda2: 10.0 }, &grid, &opts))
    });
    group.finish();
}

fn build_laplacian(c: &mut Criterion) {
    let fx = fixture(200, 3);
    c.bench_function("laplacian/p=2200", |b| b.iter(|| laplacian(black_box(&fx.graph))));
}

fn cross_validation(c: &mut Criterion) {
    let fx = fixture(10, 4);
    let opts = CvOptions {
        nlambda: 20,
        eps: 0.01,
        ..CvOptions::default()
    };
    let policy = CvPolicy::Lambda2Grid {
        lambda2s: vec![1.0, 100.0],
    };
    let mut group = c.benchmark_group("kfold_cv");
    group.sample_size(10);
    group.bench_function("p=110", |b| {
        b.iter(|| kfold_cv(black_box(&fx.train), &fx.laplacian, &policy, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, single_fit, warm_path, build_laplacian, cross_validation);
criterion_main!(benches);
