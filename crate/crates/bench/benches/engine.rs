use ailtl_bench::Workload;
use ailtl_core::{parse_program, run, EngineConfig, ScenarioKind, ScenarioSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn scaling(c: &mut Criterion) {
    let mut g = c.benchmark_group("expressions");
    for f in [10usize, 100, 1000] {
        let w = Workload::scaling(f, 20);
        let cfg = EngineConfig::from_program(&w.program);
        g.throughput(Throughput::Elements(f as u64));
        g.bench_with_input(BenchmarkId::from_parameter(f), &w, |b, w| {
            b.iter(|| run(&w.program, &w.events, cfg.clone()).unwrap())
        });
    }
    g.finish();
}

fn queue(c: &mut Criterion) {
    let mut g = c.benchmark_group("queue");
    for (name, d) in [("gated", 0), ("dup3", 3)] {
        let w = Workload::scenario(&ScenarioSpec::new(ScenarioKind::Queue).inject_duplicates(d));
        let cfg = EngineConfig::from_program(&w.program);
        g.bench_function(name, |b| b.iter(|| run(&w.program, &w.events, cfg.clone()).unwrap()));
    }
    g.finish();
}

fn parse(c: &mut Criterion) {
    let s = ailtl_core::generate(&ScenarioSpec::new(ScenarioKind::Battery)).unwrap();
    c.bench_function("parse battery program", |b| b.iter(|| parse_program(&s.program).unwrap()));
}

criterion_group!(benches, scaling, queue, parse);
criterion_main!(benches);
