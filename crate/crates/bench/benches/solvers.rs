use criterion::{criterion_group, criterion_main, Criterion};
use riskopt_bench::{bd_spec, exp_linear_model, level, ns_spec, uniform_model};
use riskopt_core::dro::DroSpec;
use riskopt_core::perturb::PerturbationFamily;
use riskopt_core::probe::{probe, ProbeSettings};
use riskopt_core::{MetricKind, RiskMeasure};

fn bench_var_solvers(c: &mut Criterion) {
    let uni = uniform_model();
    let exp = exp_linear_model();
    c.bench_function("solve_var_ns_uniform", |b| {
        b.iter(|| riskopt_core::var_opt::solve_var_ns(&uni, &ns_spec(0.2)).unwrap())
    });
    c.bench_function("solve_var_bd_exponential", |b| {
        b.iter(|| riskopt_core::var_opt::solve_var_bd(&exp, &bd_spec(0.5, 1.0)).unwrap())
    });
    c.bench_function("solve_dro_var_bd", |b| {
        let spec = DroSpec::new(bd_spec(0.5, 1.0), 0.1).unwrap();
        b.iter(|| riskopt_core::dro::solve_dro_var_bd(&exp, &spec).unwrap())
    });
}

fn bench_es_solvers(c: &mut Criterion) {
    let uni = uniform_model();
    let exp = exp_linear_model();
    c.bench_function("solve_es_ns_uniform", |b| {
        b.iter(|| riskopt_core::es_opt::solve_es_ns(&uni, &ns_spec(0.2)).unwrap())
    });
    c.bench_function("solve_es_bd_exponential", |b| {
        b.iter(|| riskopt_core::es_opt::solve_es_bd(&exp, &bd_spec(0.5, 1.0)).unwrap())
    });
}

fn bench_probe(c: &mut Criterion) {
    let uni = uniform_model();
    let g = riskopt_core::var_opt::solve_var_ns(&uni, &ns_spec(0.2)).unwrap();
    let settings = ProbeSettings {
        metric: MetricKind::LInf,
        eps_grid: vec![0.1, 0.01, 0.001],
        n_samples: 100_000,
        seed: 1,
    };
    c.bench_function("probe_shift_analytic", |b| {
        b.iter(|| {
            probe(
                &uni,
                &g,
                RiskMeasure::Var,
                level(),
                &PerturbationFamily::Shift,
                &settings,
                None,
            )
            .unwrap()
        })
    });
    let nudge = PerturbationFamily::nudge_at_quantile(&uni, 0.9).unwrap();
    c.bench_function("probe_nudge_monte_carlo_100k", |b| {
        b.iter(|| {
            probe(&uni, &g, RiskMeasure::Var, level(), &nudge, &settings, None).unwrap()
        })
    });
}

criterion_group!(benches, bench_var_solvers, bench_es_solvers, bench_probe);
criterion_main!(benches);
