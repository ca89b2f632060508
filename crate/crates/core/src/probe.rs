//! Empirical robustness verdicts: trace the solvency gap
//! `rho(g(Z_eps)) - rho(g(X))` along a perturbation family and decide
//! whether the risk of the optimized position is continuous at the base
//! model.
//!
//! Continuity cannot be decided from finitely many sizes, so the verdict is
//! an explicit statistical rule with threshold `tau = 10 (stderr + 1e-6)`
//! per point, and `Inconclusive` is a first-class outcome.

use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::metrics::{coupled_distance, MetricKind};
use crate::perturb::PerturbationFamily;
use crate::risk::{es_of_sorted, var_of_sorted, RiskLevel, RiskMeasure};
use crate::sampling::derive;
use crate::solution::{SolutionFunction, SolutionMeta};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Robust,
    NonRobust,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapPoint {
    /// Size parameter handed to the family.
    pub eps: f64,
    /// Distance between the coupled pair under the probe metric (closed form
    /// where available, measured otherwise).
    pub distance: f64,
    pub rho_at_z: f64,
    pub rho_at_x: f64,
    /// Solvency gap: actual risk minus perceived risk.
    pub gap: f64,
    /// Monte Carlo standard error of `rho_at_z` (0 on the closed-form path).
    pub mc_stderr: f64,
    /// Verdict threshold for this point.
    pub tau: f64,
}

/// Contrast quantities that need the re-solved problem at the perturbed
/// model; reported for context, never used in the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalityContrast {
    pub eps: f64,
    /// rho(g_Z(Z)): the optimum if the perturbed model were known.
    pub idealistic: f64,
    /// idealistic minus actual rho(g_X(Z)).
    pub optimality_gap: f64,
    /// idealistic minus perceived rho(g_X(X)).
    pub optimality_shift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub rho: RiskMeasure,
    pub p: f64,
    pub metric: MetricKind,
    pub family: String,
    pub eps_grid: Vec<f64>,
    pub gap_curve: Vec<GapPoint>,
    pub limit_gap_estimate: f64,
    pub verdict: Verdict,
    pub solution_meta: SolutionMeta,
    pub optimality: Vec<OptimalityContrast>,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ProbeSettings {
    pub metric: MetricKind,
    /// Strictly decreasing positive sizes; at least three for a decidable
    /// verdict.
    pub eps_grid: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl ProbeSettings {
    fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return Err(Error::domain("empty perturbation grid".to_string()));
        }
        if self.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::domain("perturbation sizes must be positive".to_string()));
        }
        if self.eps_grid.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::domain(
                "perturbation sizes must be strictly decreasing".to_string(),
            ));
        }
        if self.n_samples == 0 {
            return Err(Error::domain("n_samples must be positive".to_string()));
        }
        Ok(())
    }
}

/// Number of batches used for the Monte Carlo standard error.
const STDERR_BATCHES: usize = 10;

fn empirical_rho(sorted: &[f64], rho: RiskMeasure, p: RiskLevel) -> Result<f64> {
    match rho {
        RiskMeasure::Var => var_of_sorted(sorted, p),
        RiskMeasure::Es => es_of_sorted(sorted, p),
    }
}

fn batch_stderr(values: &[f64], rho: RiskMeasure, p: RiskLevel) -> Result<f64> {
    let n = values.len();
    let b = STDERR_BATCHES.min(n);
    let size = n / b;
    if size == 0 {
        return Ok(f64::INFINITY);
    }
    let mut estimates = Vec::with_capacity(b);
    for i in 0..b {
        let mut chunk = values[i * size..(i + 1) * size].to_vec();
        chunk.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
        estimates.push(empirical_rho(&chunk, rho, p)?);
    }
    let mean = estimates.iter().sum::<f64>() / b as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    Ok((var / b as f64).sqrt())
}

/// Re-solver hook: produces the optimizer for a perturbed model so the
/// report can contrast the solvency gap with the optimality gap and shift.
pub type ReSolver<'a> = dyn Fn(&MarketModel) -> Result<SolutionFunction> + Sync + 'a;

/// Traces the gap curve of `solution` under `family` and issues the verdict.
pub fn probe(
    model: &MarketModel,
    solution: &SolutionFunction,
    rho: RiskMeasure,
    p: RiskLevel,
    family: &PerturbationFamily,
    settings: &ProbeSettings,
    resolve: Option<&ReSolver<'_>>,
) -> Result<RobustnessReport> {
    settings.validate()?;
    family.validate_against(model, p.value())?;
    let rho_at_x = solution.risk_under(model.x(), rho, p)?;

    let points: Result<Vec<GapPoint>> = settings
        .eps_grid
        .par_iter()
        .enumerate()
        .map(|(idx, &eps)| -> Result<GapPoint> {
            let sub_seed = derive(settings.seed, idx as u64);
            let (rho_at_z, mc_stderr, measured_distance) =
                if let Some((slope, shift)) = family.analytic_input_transform(eps) {
                    let v = solution.risk_under_affine_input(model.x(), slope, shift, rho, p)?;
                    let d = match family.analytic_distance(model, eps, settings.metric) {
                        Some(d) => d,
                        None => {
                            let cs = family.sample_coupled(model, eps, settings.n_samples, sub_seed)?;
                            coupled_distance(settings.metric, &cs.base, &cs.perturbed)?
                        }
                    };
                    (v, 0.0, d)
                } else {
                    let cs = family.sample_coupled(model, eps, settings.n_samples, sub_seed)?;
                    let gz = solution.apply(&cs.perturbed);
                    let mut sorted = gz.clone();
                    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
                    let v = empirical_rho(&sorted, rho, p)?;
                    let se = batch_stderr(&gz, rho, p)?;
                    let d = match family.analytic_distance(model, eps, settings.metric) {
                        Some(d) => d,
                        None => coupled_distance(settings.metric, &cs.base, &cs.perturbed)?,
                    };
                    (v, se, d)
                };
            let tau = 10.0 * (mc_stderr + 1e-6);
            Ok(GapPoint {
                eps,
                distance: measured_distance,
                rho_at_z,
                rho_at_x,
                gap: rho_at_z - rho_at_x,
                mc_stderr,
                tau,
            })
        })
        .collect();
    let points = points?;

    let verdict = decide(&points);
    let limit_gap_estimate = points.last().map(|pt| pt.gap).unwrap_or(f64::NAN);

    let mut optimality = Vec::new();
    if let Some(resolver) = resolve {
        for (idx, &eps) in settings.eps_grid.iter().enumerate() {
            if let Some(z_law) = family.analytic_z_law(model, eps) {
                if let Ok(z_model) = MarketModel::new(z_law.clone(), model.gamma().spec().clone()) {
                    if let Ok(g_z) = resolver(&z_model) {
                        let idealistic = g_z.risk_under(&z_law, rho, p)?;
                        let actual = points[idx].rho_at_z;
                        optimality.push(OptimalityContrast {
                            eps,
                            idealistic,
                            optimality_gap: idealistic - actual,
                            optimality_shift: idealistic - rho_at_x,
                        });
                    }
                }
            }
        }
    }

    Ok(RobustnessReport {
        rho,
        p: p.value(),
        metric: settings.metric,
        family: family.label().to_string(),
        eps_grid: settings.eps_grid.clone(),
        gap_curve: points,
        limit_gap_estimate,
        verdict,
        solution_meta: solution.meta.clone(),
        optimality,
        n_samples: settings.n_samples,
        seed: settings.seed,
    })
}

/// Verdict rule over the three smallest sizes (the last three points of the
/// decreasing grid): NonRobust when all three gaps clear their thresholds,
/// Robust when the gaps shrink monotonically (within noise) below threshold
/// at the smallest size, Inconclusive otherwise.
fn decide(points: &[GapPoint]) -> Verdict {
    if points.len() < 3 {
        return Verdict::Inconclusive;
    }
    let g1 = &points[points.len() - 1];
    let g2 = &points[points.len() - 2];
    let g3 = &points[points.len() - 3];
    if g1.gap.abs() > g1.tau && g2.gap.abs() > g2.tau && g3.gap.abs() > g3.tau {
        return Verdict::NonRobust;
    }
    let shrinking = g1.gap.abs() <= g2.gap.abs() + g2.tau && g2.gap.abs() <= g3.gap.abs() + g3.tau;
    if shrinking && g1.gap.abs() <= g1.tau {
        return Verdict::Robust;
    }
    Verdict::Inconclusive
}

/// Declared continuity of the objective functional with respect to each
/// uncertainty metric.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RhoContinuityProfile {
    pub sup_norm: bool,
    pub lq_norm: bool,
    pub weak: bool,
}

impl RhoContinuityProfile {
    /// ES: continuous under the sup and Lq norms, not under the weak metric
    /// on unbounded families.
    pub fn es() -> Self {
        RhoContinuityProfile { sup_norm: true, lq_norm: true, weak: false }
    }

    /// VaR: always 1-Lipschitz under the sup norm; continuous under the
    /// other metrics exactly when the quantile function is continuous at p.
    pub fn var(quantile_continuous_at_p: bool) -> Self {
        RhoContinuityProfile {
            sup_norm: true,
            lq_norm: quantile_continuous_at_p,
            weak: quantile_continuous_at_p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityGuarantee {
    /// The sufficient criterion applies: a continuous (and, for Lq,
    /// linearly growing) optimizer composed with a rho continuous under the
    /// metric is robust.
    GuaranteedRobust,
    /// The criterion does not apply; nothing is implied.
    NoGuarantee,
}

/// Sufficient-condition checker: structural continuity of the optimizer
/// matched against the declared continuity of the objective.
pub fn check_continuity_criterion(
    solution: &SolutionFunction,
    rho_continuity: RhoContinuityProfile,
    metric: MetricKind,
) -> ContinuityGuarantee {
    let ok = match metric {
        MetricKind::LInf => solution.is_continuous() && rho_continuity.sup_norm,
        MetricKind::Lq { .. } => {
            solution.is_continuous() && solution.has_linear_growth() && rho_continuity.lq_norm
        }
        MetricKind::ProkhorovWeak => solution.is_continuous() && rho_continuity.weak,
    };
    if ok {
        ContinuityGuarantee::GuaranteedRobust
    } else {
        ContinuityGuarantee::NoGuarantee
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ScalarDistribution;
    use crate::market::PricingSpec;
    use crate::problem::ProblemSpec;
    use crate::solution::{Piece, Segment};

    fn uniform_model() -> MarketModel {
        MarketModel::new(ScalarDistribution::uniform(0.0, 1.0).unwrap(), PricingSpec::Constant)
            .unwrap()
    }

    fn lvl(p: f64) -> RiskLevel {
        RiskLevel::new(p).unwrap()
    }

    fn settings(metric: MetricKind) -> ProbeSettings {
        ProbeSettings { metric, eps_grid: vec![0.1, 0.01, 0.001], n_samples: 100_000, seed: 42 }
    }

    #[test]
    fn grid_validation() {
        let s = ProbeSettings {
            metric: MetricKind::LInf,
            eps_grid: vec![0.01, 0.1],
            n_samples: 10,
            seed: 0,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn constant_solution_is_robust_with_zero_gaps() {
        let m = uniform_model();
        let g = SolutionFunction::constant(0.2, SolutionMeta::bare("const")).unwrap();
        let report = probe(
            &m,
            &g,
            RiskMeasure::Es,
            lvl(0.9),
            &PerturbationFamily::Shift,
            &settings(MetricKind::LInf),
            None,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Robust);
        assert!(report.gap_curve.iter().all(|pt| pt.gap.abs() < 1e-12));
    }

    #[test]
    fn var_threshold_solution_is_non_robust_under_shift() {
        let m = uniform_model();
        let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.2).unwrap();
        let g = crate::var_opt::solve_var_ns(&m, &spec).unwrap();
        let report = probe(
            &m,
            &g,
            RiskMeasure::Var,
            lvl(0.9),
            &PerturbationFamily::Shift,
            &settings(MetricKind::LInf),
            None,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::NonRobust);
        // Gap = 0.9 + delta - q at every delta.
        let q = g.meta.q.unwrap();
        for pt in &report.gap_curve {
            approx::assert_abs_diff_eq!(pt.gap, 0.9 + pt.eps - q, epsilon = 1e-9);
            approx::assert_abs_diff_eq!(pt.distance, pt.eps, epsilon = 1e-12);
        }
    }

    #[test]
    fn es_cap_solution_is_robust_under_shift() {
        let m = uniform_model();
        let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.2).unwrap();
        let g = crate::es_opt::solve_es_ns(&m, &spec).unwrap();
        let report = probe(
            &m,
            &g,
            RiskMeasure::Es,
            lvl(0.9),
            &PerturbationFamily::Shift,
            &settings(MetricKind::lq(2.0).unwrap()),
            None,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Robust);
        for pt in &report.gap_curve {
            assert!(pt.gap.abs() <= pt.eps + 1e-9);
        }
    }

    #[test]
    fn reports_are_bit_identical_for_equal_seeds() {
        let m = uniform_model();
        let spec = ProblemSpec::no_short_selling(lvl(0.9), 0.2).unwrap();
        let g = crate::var_opt::solve_var_ns(&m, &spec).unwrap();
        let fam = PerturbationFamily::nudge_at_quantile(&m, 0.9).unwrap();
        let mut s = settings(MetricKind::LInf);
        s.n_samples = 20_000;
        let r1 = probe(&m, &g, RiskMeasure::Var, lvl(0.9), &fam, &s, None).unwrap();
        let r2 = probe(&m, &g, RiskMeasure::Var, lvl(0.9), &fam, &s, None).unwrap();
        let j1 = serde_json::to_string(&r1.gap_curve).unwrap();
        let j2 = serde_json::to_string(&r2.gap_curve).unwrap();
        assert_eq!(j1, j2);
    }

    #[test]
    fn continuity_checker_matches_clauses() {
        let cap = SolutionFunction::new(
            vec![Segment {
                hi: f64::INFINITY,
                hi_closed: true,
                piece: Piece::MinWithConst { level: 0.3 },
            }],
            SolutionMeta::bare("cap"),
        )
        .unwrap();
        assert_eq!(
            check_continuity_criterion(
                &cap,
                RhoContinuityProfile::es(),
                MetricKind::lq(2.0).unwrap()
            ),
            ContinuityGuarantee::GuaranteedRobust
        );
        assert_eq!(
            check_continuity_criterion(&cap, RhoContinuityProfile::es(), MetricKind::ProkhorovWeak),
            ContinuityGuarantee::NoGuarantee
        );

        let jumpy = SolutionFunction::new(
            vec![
                Segment { hi: 0.9, hi_closed: true, piece: Piece::Const { value: 0.1 } },
                Segment { hi: f64::INFINITY, hi_closed: true, piece: Piece::Const { value: 1.0 } },
            ],
            SolutionMeta::bare("jump"),
        )
        .unwrap();
        for metric in [MetricKind::LInf, MetricKind::lq(1.0).unwrap(), MetricKind::ProkhorovWeak] {
            assert_eq!(
                check_continuity_criterion(&jumpy, RhoContinuityProfile::var(true), metric),
                ContinuityGuarantee::NoGuarantee
            );
        }
    }
}
