use criterion::{criterion_group, criterion_main, Criterion};
use homflow::flow::{integrate, FlowControls, FlowKind};
use homflow_bench::two_weight_fixture;

fn bench_flow(c: &mut Criterion) {
    let (split, g) = two_weight_fixture();
    let controls = FlowControls { kind: FlowKind::Unimodular, t_max: 0.5, ..Default::default() };
    let mut group = c.benchmark_group("flow");
    group.sample_size(10);
    group.bench_function("unimodular_e5_to_half", |b| b.iter(|| integrate(&split, &g, &controls).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_flow);
criterion_main!(benches);
