use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use simtmeld::analysis::Analyses;
use simtmeld::ir::{parse_module, LatencyModel};
use simtmeld::meld::{run_darm, MeldConfig};
use simtmeld::sim::{execute_warp, SimConfig};
use simtmeld_bench::cases;

fn pipeline(c: &mut Criterion) {
    let cases = cases(32);
    let cfg = MeldConfig::default();
    let lm = LatencyModel::default();
    let sim = SimConfig::with_warp_size(32);

    let mut g = c.benchmark_group("parse");
    for k in &cases {
        g.bench_with_input(BenchmarkId::from_parameter(k.name), k.source, |b, src| {
            b.iter(|| parse_module(black_box(src)).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("analyses");
    for k in &cases {
        g.bench_function(k.name, |b| {
            b.iter(|| Analyses::compute(black_box(k.function())).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("meld");
    for k in &cases {
        g.bench_function(k.name, |b| {
            b.iter_batched(
                || k.function().clone(),
                |mut f| run_darm(&mut f, &cfg, &lm).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    g.finish();

    let mut g = c.benchmark_group("simulate");
    for k in &cases {
        g.bench_function(k.name, |b| {
            b.iter(|| execute_warp(&k.module, k.function(), black_box(&k.fixture), &sim).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
