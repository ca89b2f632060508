use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riskopt_bench::uniform_model;
use riskopt_core::metrics::{coupled_distance, prokhorov_discrete, MetricKind};
use riskopt_core::sampling::stream;
use riskopt_core::ScalarDistribution;

fn bench_prokhorov(c: &mut Criterion) {
    let mut group = c.benchmark_group("prokhorov_discrete");
    for n in [50usize, 200, 1000] {
        let base = ScalarDistribution::uniform(0.0, 1.0).unwrap();
        let mu = base.quantile_atoms(n).unwrap();
        let nu = base.shifted(0.05).unwrap().quantile_atoms(n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| prokhorov_discrete(&mu, &nu).unwrap())
        });
    }
    group.finish();
}

fn bench_coupled(c: &mut Criterion) {
    let m = uniform_model();
    let mut rng = stream(3, 0);
    let xs = m.x().sample_vec(&mut rng, 1_000_000);
    let zs: Vec<f64> = xs.iter().map(|x| x + 0.01).collect();
    c.bench_function("coupled_lq2_1e6", |b| {
        b.iter(|| coupled_distance(MetricKind::lq(2.0).unwrap(), &xs, &zs).unwrap())
    });
    c.bench_function("coupled_prokhorov_1e6_discretized", |b| {
        b.iter(|| coupled_distance(MetricKind::ProkhorovWeak, &xs, &zs).unwrap())
    });
}

criterion_group!(benches, bench_prokhorov, bench_coupled);
criterion_main!(benches);
