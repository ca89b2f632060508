//! Risk-measure correctness against independent oracles.
//!
//! The quantile oracle inverts the cdf by bisection; the tail-average oracle
//! integrates the quantile function by composite Simpson after the
//! substitution `u = 1 - (1-p) e^{-s}`, which flattens the upper tail. Both
//! are deliberately separate from the library's closed forms.

use riskopt_core::risk::{es_of_dist, es_of_samples, var_of_dist, var_of_samples, RiskLevel};
use riskopt_core::sampling::stream;
use riskopt_core::ScalarDistribution;

fn lvl(p: f64) -> RiskLevel {
    RiskLevel::new(p).unwrap()
}

/// Bisection inverse of the cdf (left quantile).
fn quantile_oracle(d: &ScalarDistribution, p: f64) -> f64 {
    let (slo, shi) = d.support();
    let mut lo = slo - 1.0;
    let mut hi = if shi.is_finite() { shi + 1.0 } else { slo.max(1.0) };
    while d.cdf(hi) < p {
        hi *= 4.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d.cdf(mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Composite-Simpson tail average of the quantile function.
fn es_oracle(d: &ScalarDistribution, p: f64) -> f64 {
    // integral_p^1 Q(u) du = (1-p) integral_0^inf Q(1 - (1-p) e^-s) e^-s ds
    let s_max = 29.0;
    let n = 40_000;
    let h = s_max / n as f64;
    let f = |s: f64| {
        let u = 1.0 - (1.0 - p) * (-s).exp();
        d.quantile(u).unwrap() * (-s).exp()
    };
    let mut acc = f(0.0) + f(s_max);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    (1.0 - p) * acc * h / 3.0 / (1.0 - p)
}

fn families() -> Vec<ScalarDistribution> {
    vec![
        ScalarDistribution::uniform(0.0, 1.0).unwrap(),
        ScalarDistribution::exponential(1.0).unwrap(),
        ScalarDistribution::lognormal(0.0, 1.0).unwrap(),
    ]
}

#[test]
fn analytic_var_matches_cdf_inversion() {
    for d in families() {
        for p in [0.5, 0.9, 0.99] {
            let got = var_of_dist(&d, lvl(p)).unwrap();
            let want = quantile_oracle(&d, p);
            assert!(
                (got - want).abs() <= 1e-8,
                "{d:?} p={p}: {got} vs oracle {want}"
            );
        }
    }
}

#[test]
fn analytic_es_matches_quadrature_of_quantile() {
    for d in families() {
        for p in [0.5, 0.9, 0.99] {
            let got = es_of_dist(&d, lvl(p)).unwrap();
            let want = es_oracle(&d, p);
            assert!(
                (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                "{d:?} p={p}: {got} vs oracle {want}"
            );
        }
    }
}

#[test]
fn empirical_estimators_within_three_standard_errors() {
    let n = 1_000_000;
    for (stream_id, d) in families().into_iter().enumerate() {
        let mut rng = stream(2024, stream_id as u64);
        let xs = d.sample_vec(&mut rng, n);
        for p in [0.5, 0.9, 0.99] {
            let var_true = var_of_dist(&d, lvl(p)).unwrap();
            let var_emp = var_of_samples(&xs, lvl(p)).unwrap();
            // Asymptotic quantile standard error: sqrt(p(1-p)/n) / f(VaR_p).
            let density = d.pdf(var_true).unwrap();
            let se_var = (p * (1.0 - p) / n as f64).sqrt() / density;
            assert!(
                (var_emp - var_true).abs() <= 3.0 * se_var,
                "{d:?} p={p}: empirical VaR {var_emp} vs {var_true} (3se = {})",
                3.0 * se_var
            );

            let es_true = es_of_dist(&d, lvl(p)).unwrap();
            let es_emp = es_of_samples(&xs, lvl(p)).unwrap();
            // Influence-function standard error of the tail-average
            // estimator: sd((X - v)^+) / ((1-p) sqrt(n)).
            let excess: Vec<f64> = xs.iter().map(|x| (x - var_true).max(0.0)).collect();
            let mean_ex = excess.iter().sum::<f64>() / n as f64;
            let var_ex =
                excess.iter().map(|x| (x - mean_ex).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se_es = (var_ex.sqrt() / ((1.0 - p) * (n as f64).sqrt())).max(1e-6);
            assert!(
                (es_emp - es_true).abs() <= 3.0 * se_es,
                "{d:?} p={p}: empirical ES {es_emp} vs {es_true} (3se = {})",
                3.0 * se_es
            );
        }
    }
}

#[test]
fn runtime_budget_for_risk_suite() {
    // The three checks above re-run here under a single wall-clock budget.
    let start = std::time::Instant::now();
    analytic_var_matches_cdf_inversion();
    analytic_es_matches_quadrature_of_quantile();
    empirical_estimators_within_three_standard_errors();
    assert!(start.elapsed().as_secs_f64() < 10.0, "risk suite too slow");
}

/// Tail spikes of fixed mass (1-p)/2 whose height grows with n: the quantile
/// at level p is untouched while the tail average explodes, reproducing the
/// discontinuity of the tail average in the weak topology.
#[test]
fn continuity_contrast_between_the_two_measures() {
    let p = lvl(0.9);
    let d = ScalarDistribution::uniform(0.0, 1.0).unwrap();
    let mut rng = stream(7, 0);
    let n = 200_000;
    let xs = d.sample_vec(&mut rng, n);
    let var_base = var_of_samples(&xs, p).unwrap();
    let es_base = es_of_samples(&xs, p).unwrap();

    // Spikes ride on the upper-tail event of mass (1-p)/2 = 0.05.
    let spike_mass = 0.05;
    let cut = d.quantile(1.0 - spike_mass).unwrap();
    let mut prev_es = es_base;
    for k in 1..=4u32 {
        let height = (10u64.pow(2 * k)) as f64;
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| if x > cut { x + height } else { x })
            .collect();
        let var_spiked = var_of_samples(&ys, p).unwrap();
        let es_spiked = es_of_samples(&ys, p).unwrap();
        // The spike mass sits strictly above level p, so the quantile is
        // untouched.
        assert_eq!(var_spiked, var_base, "VaR moved: {var_spiked} vs {var_base}");
        // ES grows without bound along the sequence.
        assert!(es_spiked > prev_es + height * 0.3, "ES did not diverge");
        prev_es = es_spiked;
    }
}
