//! Headline robustness verdicts: quantile-threshold optimizers break under
//! every perturbation family and metric, tail-average optimizers hold under
//! the norm metrics (but not the weak metric on unbounded spikes), and the
//! worst-case optimizer holds inside its ball.

use riskopt_core::dro::{solve_dro_var_bd, DroSpec};
use riskopt_core::es_opt::{solve_es_cm, solve_es_ns};
use riskopt_core::metrics::coupled_distance;
use riskopt_core::perturb::{one_sided_binomial_z, PerturbationFamily};
use riskopt_core::probe::{probe, ProbeSettings, Verdict};
use riskopt_core::var_opt::{solve_var_bd, solve_var_ns};
use riskopt_core::{
    MarketModel, MetricKind, PricingSpec, ProblemSpec, RiskLevel, RiskMeasure,
    ScalarDistribution,
};

fn lvl(p: f64) -> RiskLevel {
    RiskLevel::new(p).unwrap()
}

fn uniform_model() -> MarketModel {
    MarketModel::new(ScalarDistribution::uniform(0.0, 1.0).unwrap(), PricingSpec::Constant)
        .unwrap()
}

fn exp_linear_model() -> MarketModel {
    MarketModel::new(
        ScalarDistribution::exponential(1.0).unwrap(),
        PricingSpec::Linear { intercept: 0.0, slope: 1.0 },
    )
    .unwrap()
}

fn settings(metric: MetricKind, grid: &[f64], n: usize) -> ProbeSettings {
    ProbeSettings { metric, eps_grid: grid.to_vec(), n_samples: n, seed: 20240811 }
}

#[test]
fn var_ns_non_robust_under_shift_in_all_three_metrics() {
    let m = uniform_model();
    let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.2).unwrap();
    let g = solve_var_ns(&m, &spec).unwrap();
    let q = g.meta.q.unwrap();
    for metric in [MetricKind::LInf, MetricKind::lq(2.0).unwrap(), MetricKind::ProkhorovWeak] {
        let report = probe(
            &m,
            &g,
            RiskMeasure::Var,
            lvl(0.9),
            &PerturbationFamily::Shift,
            &settings(metric, &[0.1, 0.01, 0.001], 200_000),
            None,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::NonRobust, "metric {metric:?}");
        for pt in &report.gap_curve {
            // Analytic pushforward: the quantile jumps to the top branch.
            assert!((pt.gap - (0.9 + pt.eps - q)).abs() <= 1e-9);
            assert!(pt.gap > 0.0, "under-capitalization has positive sign");
            // Distance column: = delta under the norms, <= delta weakly.
            match metric {
                MetricKind::ProkhorovWeak => assert!(pt.distance <= pt.eps + 1e-9),
                _ => assert!((pt.distance - pt.eps).abs() <= 1e-12),
            }
        }
    }
}

#[test]
fn var_ns_non_robust_under_nudge_family() {
    let m = uniform_model();
    let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.2).unwrap();
    let g = solve_var_ns(&m, &spec).unwrap();
    let fam = PerturbationFamily::nudge_at_quantile(&m, 0.9).unwrap();
    for metric in [MetricKind::LInf, MetricKind::lq(2.0).unwrap(), MetricKind::ProkhorovWeak] {
        let report = probe(
            &m,
            &g,
            RiskMeasure::Var,
            lvl(0.9),
            &fam,
            &settings(metric, &[0.2, 0.1, 0.05], 400_000),
            None,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::NonRobust, "metric {metric:?}");
        // The gap approaches the jump size 0.9 - q, not 0.
        assert!(report.limit_gap_estimate > 0.5);
    }
}

#[test]
fn var_bd_non_robust_under_shift() {
    let m = exp_linear_model();
    let spec = ProblemSpec::bounded(lvl(0.9), 0.5, 1.0).unwrap();
    let g = solve_var_bd(&m, &spec).unwrap();
    let q = g.meta.q_prime.unwrap();
    let report = probe(
        &m,
        &g,
        RiskMeasure::Var,
        lvl(0.9),
        &PerturbationFamily::Shift,
        &settings(MetricKind::LInf, &[0.1, 0.01, 0.001], 100_000),
        None,
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::NonRobust);
    for pt in &report.gap_curve {
        // The adversary pushes mass past the threshold: risk hits the cap.
        assert!((pt.gap - (1.0 - q)).abs() <= 1e-9);
    }
}

#[test]
fn es_ns_robust_under_shift_and_nudge_in_norm_metrics() {
    let m = uniform_model();
    let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.2).unwrap();
    let g = solve_es_ns(&m, &spec).unwrap();
    let nudge = PerturbationFamily::nudge_at_quantile(&m, 0.9).unwrap();
    for metric in [MetricKind::LInf, MetricKind::lq(2.0).unwrap()] {
        for fam in [&PerturbationFamily::Shift, &nudge] {
            let report = probe(
                &m,
                &g,
                RiskMeasure::Es,
                lvl(0.9),
                fam,
                &settings(metric, &[0.1, 0.01, 0.001], 400_000),
                None,
            )
            .unwrap();
            assert_eq!(report.verdict, Verdict::Robust, "{} under {metric:?}", fam.label());
            for pt in &report.gap_curve {
                // 1-Lipschitz position: the gap is below the sup distance.
                assert!(pt.gap.abs() <= pt.eps + 10.0 * (pt.mc_stderr + 1e-9));
            }
        }
    }
}

#[test]
fn constant_solution_robust_under_every_family() {
    let m = uniform_model();
    let spec = ProblemSpec::complete_market(lvl(0.9), 0.2).unwrap();
    let g = solve_es_cm(&m, &spec).unwrap();
    let families = vec![
        PerturbationFamily::Shift,
        PerturbationFamily::Scale,
        PerturbationFamily::nudge_at_quantile(&m, 0.9).unwrap(),
        PerturbationFamily::tail_spike(),
    ];
    for fam in &families {
        let metric = match fam {
            PerturbationFamily::TailSpike { .. } => MetricKind::ProkhorovWeak,
            _ => MetricKind::LInf,
        };
        let report = probe(
            &m,
            &g,
            RiskMeasure::Es,
            lvl(0.9),
            fam,
            &settings(metric, &[0.04, 0.02, 0.01], 100_000),
            None,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Robust, "{}", fam.label());
        assert!(report.gap_curve.iter().all(|pt| pt.gap.abs() < 1e-9));
    }
}

#[test]
fn worst_case_solution_robust_inside_its_ball() {
    let m = exp_linear_model();
    let base = ProblemSpec::bounded(lvl(0.9), 0.5, 1.0).unwrap();
    let g = solve_dro_var_bd(&m, &DroSpec::new(base, 0.1).unwrap()).unwrap();
    // Perturbations up to (strictly inside) the solved-for radius.
    let report = probe(
        &m,
        &g,
        RiskMeasure::Var,
        lvl(0.9),
        &PerturbationFamily::Shift,
        &settings(MetricKind::LInf, &[0.09, 0.05, 0.01], 100_000),
        None,
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::Robust);
    for pt in &report.gap_curve {
        assert!(pt.gap.abs() <= 1e-9, "gap {} at eps {}", pt.gap, pt.eps);
    }
}

#[test]
fn unbounded_es_solution_breaks_under_weak_metric_spikes() {
    // The kept-exposure region is unbounded, so rare huge spikes pass
    // through the position: weak distance vanishes, the gap does not.
    let m = exp_linear_model();
    let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.5).unwrap();
    let g = solve_es_ns(&m, &spec).unwrap();
    let report = probe(
        &m,
        &g,
        RiskMeasure::Es,
        lvl(0.9),
        &PerturbationFamily::tail_spike(),
        &settings(MetricKind::ProkhorovWeak, &[0.04, 0.02, 0.01], 400_000),
        None,
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::NonRobust);
    let mut prev_distance = f64::INFINITY;
    for pt in &report.gap_curve {
        assert!(pt.distance < prev_distance, "weak distance must vanish");
        prev_distance = pt.distance;
        assert!(pt.gap > 1.0, "gap stays large, got {}", pt.gap);
    }
}

#[test]
fn nudge_inflates_tail_probability_along_the_vanishing_sequence() {
    // The index-n element of the sequence is the sampler at size 1/n; the
    // strict inequality P(phi(Z_n) <= a) < p must hold at every index.
    let m = uniform_model();
    let a = m.x().quantile(0.9).unwrap();
    let fam = PerturbationFamily::nudge_at_quantile(&m, 0.9).unwrap();
    fam.validate_against(&m, 0.9).unwrap();
    for n in [5u64, 10, 20, 50] {
        let eps = 1.0 / n as f64;
        let cs = fam.sample_coupled(&m, eps, 1_000_000, 100 + n).unwrap();
        let below = cs.perturbed.iter().filter(|&&z| z <= a).count();
        let z = one_sided_binomial_z(below, cs.perturbed.len(), 0.9);
        assert!(z < -3.09, "n {n}: z = {z}");
        // Samplewise sup bound and support preservation.
        for (x, zv) in cs.base.iter().zip(&cs.perturbed) {
            assert!((x - zv).abs() <= eps + 1e-15);
            assert!(*zv >= 0.0 && *zv <= 1.0);
        }
    }
}

#[test]
fn short_grids_and_mixed_curves_are_inconclusive() {
    let m = uniform_model();
    let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.2).unwrap();
    let g = solve_var_ns(&m, &spec).unwrap();
    let report = probe(
        &m,
        &g,
        RiskMeasure::Var,
        lvl(0.9),
        &PerturbationFamily::Shift,
        &settings(MetricKind::LInf, &[0.1, 0.01], 10_000),
        None,
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::Inconclusive);
}

#[test]
fn family_distances_match_measured_coupled_distances() {
    let m = uniform_model();
    let n = 1_000_000;
    // Scale under L2.
    let fam = PerturbationFamily::Scale;
    let cs = fam.sample_coupled(&m, 0.05, n, 21).unwrap();
    let measured = coupled_distance(MetricKind::lq(2.0).unwrap(), &cs.base, &cs.perturbed).unwrap();
    let reported = fam.analytic_distance(&m, 0.05, MetricKind::lq(2.0).unwrap()).unwrap();
    assert!(
        (measured - reported).abs() <= 3.0 * reported / (n as f64).sqrt() + 1e-6,
        "{measured} vs {reported}"
    );
    // Nudge under sup norm: the bound is approached from below.
    let fam = PerturbationFamily::nudge_at_quantile(&m, 0.9).unwrap();
    let cs = fam.sample_coupled(&m, 0.05, n, 22).unwrap();
    let measured = coupled_distance(MetricKind::LInf, &cs.base, &cs.perturbed).unwrap();
    assert!((0.05 * (1.0 - 1e-3)..=0.05).contains(&measured));
    // Spike under the weak metric.
    let fam = PerturbationFamily::tail_spike();
    let cs = fam.sample_coupled(&m, 0.02, n, 23).unwrap();
    let measured = coupled_distance(MetricKind::ProkhorovWeak, &cs.base, &cs.perturbed).unwrap();
    assert!((measured - 0.02).abs() <= 4e-3, "{measured}");
}

#[test]
fn optimality_contrast_reported_but_gap_drives_verdict() {
    let m = uniform_model();
    let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.2).unwrap();
    let g = solve_var_ns(&m, &spec).unwrap();
    let resolver = |zm: &MarketModel| solve_var_ns(zm, &spec);
    let report = probe(
        &m,
        &g,
        RiskMeasure::Var,
        lvl(0.9),
        &PerturbationFamily::Shift,
        &settings(MetricKind::LInf, &[0.1, 0.01, 0.001], 50_000),
        Some(&resolver),
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::NonRobust);
    assert_eq!(report.optimality.len(), 3);
    for oc in &report.optimality {
        // The re-solved optimum shifts by roughly the shift size, so the
        // idealistic-vs-perceived contrast stays small while the solvency
        // gap is large.
        assert!(oc.optimality_shift.abs() < 0.1);
        assert!(oc.optimality_gap < 0.0);
    }
}
