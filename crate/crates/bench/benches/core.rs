use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rftwin_bench::{demo_at, demo_kpi, points};
use rftwin_core::detect::DetectConfig;
use rftwin_core::propagation::{pathloss_db, Condition, PathlossQuery};
use rftwin_core::scenario::Environment;
use rftwin_core::twin::synthesize_default;
use rftwin_core::{compute_grid, fixtures, kmeans, run_detection};

fn pathloss(c: &mut Criterion) {
    let q = PathlossQuery {
        d2d_m: 350.0,
        fc_ghz: 3.5,
        h_bs_m: 25.0,
        h_ut_m: 1.5,
        environment: Environment::UMa,
        condition: Condition::Nlos,
    };
    c.bench_function("pathloss_uma_nlos", |b| b.iter(|| pathloss_db(black_box(&q))));
}

fn coverage(c: &mut Criterion) {
    let mut g = c.benchmark_group("compute_grid");
    g.sample_size(10);
    for res in [80.0, 40.0, 20.0] {
        let s = demo_at(res);
        g.bench_with_input(BenchmarkId::from_parameter(res), &s, |b, s| {
            b.iter(|| compute_grid(s, true).unwrap())
        });
    }
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let mut g = c.benchmark_group("kmeans_k3");
    for n in [21, 210, 2100] {
        let pts = points(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| kmeans(pts, 3, 0, 100, 1e-9).unwrap())
        });
    }
    g.finish();
}

fn twin_and_detect(c: &mut Criterion) {
    let s = fixtures::demo();
    let batch = demo_kpi(1);
    let mut g = c.benchmark_group("twin");
    g.sample_size(20);
    g.bench_function("synthesize_day", |b| b.iter(|| synthesize_default(&s, 1).unwrap()));
    g.bench_function("run_detection", |b| {
        b.iter(|| run_detection(&s, &batch, &DetectConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, pathloss, coverage, clustering, twin_and_detect);
criterion_main!(benches);
