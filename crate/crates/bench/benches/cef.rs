use std::hint::black_box;

use carbontrace_bench::{fixed_point, standard_context};
use carbontrace_core::cef::{solve_intensities_with, CefSolver};
use carbontrace_core::mcs::{run_mcs, Mode, RunConfig};
use carbontrace_core::network::{build_synthetic, SyntheticConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn scenario_evaluation(c: &mut Criterion) {
    let ctx = standard_context(CefSolver::Matrix);
    let (s, _) = fixed_point(&ctx, 3);
    let mut group = c.benchmark_group("scenario");
    group.sample_size(10);
    for mode in [Mode::Full, Mode::Virtual] {
        group.bench_function(BenchmarkId::from_parameter(mode), |b| {
            b.iter(|| ctx.evaluate(black_box(&s), mode).unwrap())
        });
    }
    group.finish();
}

fn intensity_solvers(c: &mut Criterion) {
    let ctx = standard_context(CefSolver::Auto);
    let (_, point) = fixed_point(&ctx, 3);
    let partition = ctx.partition.as_ref().expect("standard system partitions");
    let aggregated = partition.aggregate(&point.graph).unwrap();
    let mut group = c.benchmark_group("intensity");
    group.sample_size(20);
    for (name, graph) in [("full", &point.graph), ("virtual", &aggregated)] {
        for solver in [CefSolver::Sweep, CefSolver::Matrix] {
            let id = BenchmarkId::new(format!("{solver:?}").to_lowercase(), name);
            group.bench_function(id, |b| b.iter(|| solve_intensities_with(black_box(graph), solver).unwrap()));
        }
    }
    group.finish();
}

fn dc_flow(c: &mut Criterion) {
    let ctx = standard_context(CefSolver::Auto);
    let (_, point) = fixed_point(&ctx, 3);
    let injections = point.dispatch.injections(&ctx.idx, &point.consumption);
    c.bench_function("dc_flow_with_losses", |b| {
        b.iter(|| {
            let lossless = ctx.dc.solve(black_box(&injections)).unwrap();
            ctx.dc.estimate_losses(&lossless).unwrap()
        })
    });
}

fn monte_carlo(c: &mut Criterion) {
    let net = build_synthetic(&SyntheticConfig::default()).unwrap();
    let samples = 256;
    let mut group = c.benchmark_group("mcs_virtual");
    group.sample_size(10);
    group.throughput(Throughput::Elements(samples));
    for workers in [1usize, 4] {
        let cfg = RunConfig {
            samples,
            pilot: 64,
            workers,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::new("workers", workers), |b| {
            b.iter(|| run_mcs(black_box(&cfg), &net).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scenario_evaluation, intensity_solvers, dc_flow, monte_carlo);
criterion_main!(benches);
