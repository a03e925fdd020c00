//! Compares the parallel and sequential sweep backends.
//!
//! The backend is a compile-time choice, so each run measures one of them:
//! `cargo bench` for the default rayon backend, `cargo bench
//! --no-default-features` for the sequential fallback. Criterion keeps the
//! results side by side under the backend-labelled ids.

use criterion::{criterion_group, criterion_main, Criterion};
use ezzq::adaptive::{build_table, default_lambda_grid};
use ezzq::ggd::GgdParams;
use ezzq::quant::{sweep_operating_points, QuantizerKind};
use ezzq::rd::{discretize_ggd_auto, rd_curve};
use std::time::Duration;

fn backend() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

fn bench_sweep(c: &mut Criterion) {
    let p = GgdParams::new(0.5, 1.0).unwrap();
    let j_range: Vec<u8> = (0..=4).collect();
    let lambdas: Vec<f64> = (0..24).map(|i| 0.05 * 1.3f64.powi(i)).collect();
    let mut group = c.benchmark_group("sweep-soezz");
    group.sample_size(10).measurement_time(Duration::from_secs(8));
    group.bench_function(backend(), |b| {
        b.iter(|| sweep_operating_points(&p, QuantizerKind::Soezz, &j_range, &lambdas).unwrap())
    });
    group.finish();
}

fn bench_table_row(c: &mut Criterion) {
    let lambdas = default_lambda_grid();
    let j_range: Vec<u8> = (0..=4).collect();
    let mut group = c.benchmark_group("table-row-alpha-1");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    group.bench_function(backend(), |b| {
        b.iter(|| build_table(&[1.0], QuantizerKind::Ezz, &j_range, &lambdas).unwrap())
    });
    group.finish();
}

fn bench_rd_curve(c: &mut Criterion) {
    let p = GgdParams::new(1.0, 1.0).unwrap();
    let src = discretize_ggd_auto(&p).unwrap();
    let mut group = c.benchmark_group("rd-curve-laplace");
    group.sample_size(10).measurement_time(Duration::from_secs(15));
    group.bench_function(backend(), |b| b.iter(|| rd_curve(&src, 9).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_table_row, bench_rd_curve);
criterion_main!(benches);
