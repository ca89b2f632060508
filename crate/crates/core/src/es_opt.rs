//! ES optimizers for the three constraint sets.
//!
//! Complete market: solvable exactly when the pricing density stays under
//! `1/(1-p)`, and then the perfect hedge (a constant) is optimal; otherwise
//! an explicit witness family drives the objective to -inf. The constrained
//! problems keep full (resp. cap-level) exposure on `{gamma > c}` and a
//! capped profile elsewhere; `(c, r, lambda)` come from a grid-plus-refine
//! search with the budget binding at every candidate.

use crate::error::{Error, Result};
use crate::market::{MarketModel, Monotonicity, PricingSpec};
use crate::numerics::{find_root, upper_level_set, Interval};
use crate::problem::{ConstraintKind, ProblemSpec};
use crate::solution::{NamedCheck, Piece, Segment, SolutionFunction, SolutionMeta, Uniqueness};
use crate::witness::{WitnessElement, WitnessSequence};

const GRID_POINTS: usize = 64;
const REFINE_ITERS: usize = 90;

fn require_constraint(spec: &ProblemSpec, expected: ConstraintKind) -> Result<()> {
    if spec.constraint != expected {
        return Err(Error::domain(format!(
            "solver expects {expected:?} constraint, got {:?}",
            spec.constraint
        )));
    }
    Ok(())
}

/// Complete-market ES problem: the constant `x0` when the essential bound
/// holds, `Nonexistence` otherwise (see [`es_cm_witness`] for the
/// certificate).
pub fn solve_es_cm(model: &MarketModel, spec: &ProblemSpec) -> Result<SolutionFunction> {
    require_constraint(spec, ConstraintKind::CompleteMarket)?;
    let p = spec.p.value();
    let cap = 1.0 / (1.0 - p);
    let ess_sup = model.ess_sup_gamma();
    if ess_sup > cap + 1e-12 {
        return Err(Error::Nonexistence(format!(
            "ess-sup gamma = {ess_sup:.6e} exceeds 1/(1-p) = {cap:.6e}; the objective is unbounded below (see the witness sequence)"
        )));
    }
    let mut meta = SolutionMeta::bare("es_cm");
    meta.objective = spec.x0;
    meta.budget = spec.x0;
    meta.budget_residual = 0.0;
    meta.uniqueness = Uniqueness::Representative;
    meta.checks.push(NamedCheck {
        name: "gamma_essential_bound".to_string(),
        passed: true,
        detail: format!("ess-sup gamma = {ess_sup:.6e} <= {cap:.6e}"),
    });
    SolutionFunction::constant(spec.x0, meta)
}

/// The x-threshold where a monotone pricing density crosses `cut`, exact for
/// the linear family.
fn gamma_cut_threshold(model: &MarketModel, cut: f64) -> Result<f64> {
    let scale = model.gamma().scale();
    match model.gamma().spec() {
        PricingSpec::Linear { intercept, slope } if *slope != 0.0 => {
            Ok((cut / scale - intercept) / slope)
        }
        _ => {
            let x = model.x();
            let (lo, hi) = (x.quantile(1e-15)?, x.quantile(1.0 - 1e-15)?);
            find_root(|t| model.gamma_at(t) - cut, lo, hi, 1e-13)
        }
    }
}

/// Region `{gamma > cut}` as intervals.
fn gamma_above(model: &MarketModel, cut: f64) -> Result<Vec<Interval>> {
    match model.gamma().monotonicity() {
        Monotonicity::Constant => {
            if model.gamma().scale() > cut {
                Ok(vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)])
            } else {
                Ok(vec![])
            }
        }
        Monotonicity::Increasing => {
            Ok(vec![Interval::new(gamma_cut_threshold(model, cut)?, f64::INFINITY)])
        }
        Monotonicity::Decreasing => {
            Ok(vec![Interval::new(f64::NEG_INFINITY, gamma_cut_threshold(model, cut)?)])
        }
        Monotonicity::General => {
            let x = model.x();
            let (lo, hi) = (x.quantile(1e-12)?, x.quantile(1.0 - 1e-12)?);
            upper_level_set(|t| model.gamma_at(t), cut, lo, hi, 2048)
        }
    }
}

/// Witness for the unsolvable complete-market case: positions
/// `lambda 1{gamma > 1/(1-p)} - lambda y + x0` price to `x0` exactly while
/// their ES falls linearly with slope `k - y < 0`.
pub fn es_cm_witness(
    model: &MarketModel,
    spec: &ProblemSpec,
    lambdas: &[f64],
) -> Result<WitnessSequence> {
    require_constraint(spec, ConstraintKind::CompleteMarket)?;
    let p = spec.p.value();
    let cut = 1.0 / (1.0 - p);
    if model.ess_sup_gamma() <= cut + 1e-12 {
        return Err(Error::domain(
            "witness undefined: the problem admits the constant solution".to_string(),
        ));
    }
    let region = gamma_above(model, cut)?;
    let y = model.expect_gamma_indicator(&region)?;
    let theta: f64 = region.iter().map(|iv| model.x().prob(*iv)).sum();
    let k = theta.min(1.0 - p) / (1.0 - p);
    if !(y > 0.0) || k >= y {
        return Err(Error::numeric(format!(
            "degenerate witness: tail price y = {y:.6e}, indicator ES k = {k:.6e}"
        )));
    }

    let mut elements = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if lambda < 0.0 {
            return Err(Error::domain(format!("witness weights must be >= 0, got {lambda}")));
        }
        let base = spec.x0 - lambda * y;
        let segments = witness_segments(&region, base, base + lambda);
        let mut meta = SolutionMeta::bare("es_cm_witness");
        meta.lambda = Some(lambda);
        meta.objective = spec.x0 + lambda * (k - y);
        meta.uniqueness = Uniqueness::Representative;
        let mut g = SolutionFunction::new(segments, meta)?;
        let budget = g.budget_under(model)?;
        g.meta.budget = budget;
        g.meta.budget_residual = budget - spec.x0;
        g.meta.checks.push(NamedCheck {
            name: "budget_equality".to_string(),
            passed: (budget - spec.x0).abs() <= 1e-8,
            detail: format!("E[gamma g(X)] = {budget:.17e}"),
        });
        elements.push(WitnessElement {
            param: lambda,
            objective: spec.x0 + lambda * (k - y),
            solution: g,
        });
    }
    Ok(WitnessSequence {
        description: format!(
            "indicator positions on the overpriced states; ES decreases linearly with slope {:.17e}",
            k - y
        ),
        elements,
    })
}

fn witness_segments(region: &[Interval], low: f64, high: f64) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut cursor = f64::NEG_INFINITY;
    for iv in region {
        if iv.lo > cursor {
            segments.push(Segment { hi: iv.lo, hi_closed: true, piece: Piece::Const { value: low } });
        }
        segments.push(Segment { hi: iv.hi, hi_closed: false, piece: Piece::Const { value: high } });
        cursor = iv.hi;
    }
    if cursor < f64::INFINITY {
        segments.push(Segment { hi: f64::INFINITY, hi_closed: true, piece: Piece::Const { value: low } });
    } else if let Some(last) = segments.last_mut() {
        last.hi_closed = true;
    }
    segments
}

/// Candidate evaluated during the search.
#[derive(Debug, Clone)]
struct Candidate {
    es: f64,
    c: Option<f64>,
    r: f64,
    lambda: f64,
    solution: SolutionFunction,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    // Lexicographic (es, c, r); other optima may exist when ties occur.
    if (a.es - b.es).abs() > 1e-12 * (1.0 + a.es.abs()) {
        return a.es < b.es;
    }
    let ca = a.c.unwrap_or(f64::INFINITY);
    let cb = b.c.unwrap_or(f64::INFINITY);
    if (ca - cb).abs() > 1e-12 * (1.0 + ca.abs()) {
        return ca < cb;
    }
    a.r < b.r
}

fn record_quantile_check(g: &mut SolutionFunction, model: &MarketModel, p: f64, r: f64) {
    let at = g.pushforward_cdf(model.x(), r);
    let below = g.pushforward_cdf(model.x(), r - 1e-9 * (1.0 + r.abs()));
    let passed = at >= p - 1e-6 && below <= p + 1e-6;
    g.meta.checks.push(NamedCheck {
        name: "cap_is_p_quantile".to_string(),
        passed,
        detail: format!(
            "P(g(X) <= r) = {at:.10} >= p and P(g(X) < r) = {below:.10} <= p (within 1e-6)"
        ),
    });
}

/// No-short-selling ES problem.
pub fn solve_es_ns(model: &MarketModel, spec: &ProblemSpec) -> Result<SolutionFunction> {
    require_constraint(spec, ConstraintKind::NoShortSelling)?;
    let p = spec.p.value();
    let full_price = model.expect_gamma_x()?;
    if spec.x0 >= full_price {
        return Err(Error::domain(format!(
            "budget infeasible: x0 = {} >= E[gamma X] = {full_price}",
            spec.x0
        )));
    }

    let best = if model.gamma().is_constant() {
        solve_es_ns_constant_gamma(model, spec, full_price)?
    } else {
        solve_es_constrained_search(model, spec, full_price, EsForm::KeepAndCap)?
    };

    let mut g = best.solution;
    g.meta.problem = "es_ns".to_string();
    g.meta.c = best.c;
    g.meta.r = Some(best.r);
    g.meta.lambda = Some(best.lambda);
    g.meta.objective = best.es;
    let budget = g.budget_under(model)?;
    g.meta.budget = budget;
    g.meta.budget_residual = budget - spec.x0;
    g.meta.uniqueness = Uniqueness::Representative;
    g.meta.checks.push(NamedCheck {
        name: "budget_binding".to_string(),
        passed: (budget - spec.x0).abs() <= 1e-8,
        detail: format!("E[gamma g(X)] = {budget:.17e}, target {:.17e}", spec.x0),
    });
    record_quantile_check(&mut g, model, p, best.r);
    Ok(g)
}

/// Bounded ES problem.
pub fn solve_es_bd(model: &MarketModel, spec: &ProblemSpec) -> Result<SolutionFunction> {
    require_constraint(spec, ConstraintKind::Bounded)?;
    let p = spec.p.value();
    let m = spec.bound()?;

    let best = if model.gamma().is_constant() {
        // Every state costs the same, so the cheapest ES-optimal position is
        // the perfect hedge at the budget level (the degenerate tie region
        // covers the whole line).
        let mut meta = SolutionMeta::bare("es_bd");
        meta.uniqueness = Uniqueness::Representative;
        let g = SolutionFunction::constant(spec.x0, meta)?;
        Candidate { es: spec.x0, c: None, r: spec.x0, lambda: spec.x0, solution: g }
    } else {
        solve_es_constrained_search(model, spec, m, EsForm::TwoLevel { m })?
    };

    let mut g = best.solution;
    g.meta.problem = "es_bd".to_string();
    g.meta.c = best.c;
    g.meta.r = Some(best.r);
    g.meta.lambda = Some(best.lambda);
    g.meta.objective = best.es;
    let budget = g.budget_under(model)?;
    g.meta.budget = budget;
    g.meta.budget_residual = budget - spec.x0;
    g.meta.uniqueness = Uniqueness::Representative;
    g.meta.checks.push(NamedCheck {
        name: "budget_binding".to_string(),
        passed: (budget - spec.x0).abs() <= 1e-8,
        detail: format!("E[gamma g(X)] = {budget:.17e}, target {:.17e}", spec.x0),
    });
    record_quantile_check(&mut g, model, p, best.r);
    Ok(g)
}

/// Constant-gamma no-short-selling case: the regions `{gamma <> c}` collapse
/// and the optimizer lives in the convex-mix family
/// `(1-lambda) x + lambda min(x, r)` with the budget binding.
fn solve_es_ns_constant_gamma(
    model: &MarketModel,
    spec: &ProblemSpec,
    full_price: f64,
) -> Result<Candidate> {
    let p = spec.p;
    let capped_price = |r: f64| -> Result<f64> {
        model.expect_gamma_x_indicator(&[Interval::new(f64::NEG_INFINITY, r)]).and_then(|below| {
            Ok(below + r * model.expect_gamma_indicator(&[Interval::new(r, f64::INFINITY)])?)
        })
    };
    // Largest cap with lambda = 1: E[gamma min(X, r)] = x0.
    let r_max = if spec.x0 == 0.0 {
        0.0
    } else {
        let mut hi = model.x().quantile(0.9)?.max(1.0);
        while capped_price(hi)? < spec.x0 {
            hi *= 2.0;
        }
        find_root(|r| capped_price(r).map(|v| v - spec.x0).unwrap_or(f64::NAN), 0.0, hi, 1e-13)?
    };

    let evaluate = |r: f64| -> Result<Candidate> {
        let lambda = if r >= r_max {
            1.0
        } else {
            (full_price - spec.x0) / (full_price - capped_price(r)?)
        };
        let piece = if (lambda - 1.0).abs() < 1e-12 {
            Piece::MinWithConst { level: r }
        } else {
            Piece::ConvexMix { lambda, cap: r }
        };
        let g = SolutionFunction::new(
            vec![Segment { hi: f64::INFINITY, hi_closed: true, piece }],
            SolutionMeta::bare("es_ns"),
        )?;
        let es = g.es_under(model.x(), p)?;
        Ok(Candidate { es, c: None, r, lambda, solution: g })
    };

    let mut best: Option<Candidate> = None;
    let n = GRID_POINTS * 4;
    for i in 0..=n {
        let r = r_max * i as f64 / n as f64;
        let cand = evaluate(r)?;
        if best.as_ref().map_or(true, |b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    let mut best = best.expect("non-empty grid");
    // Golden-section refinement around the incumbent.
    let span = r_max / n as f64;
    let (mut lo, mut hi) = ((best.r - span).max(0.0), (best.r + span).min(r_max));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..REFINE_ITERS {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        let ca = evaluate(a)?;
        let cb = evaluate(b)?;
        if better(&ca, &cb) {
            hi = b;
            if better(&ca, &best) {
                best = ca;
            }
        } else {
            lo = a;
            if better(&cb, &best) {
                best = cb;
            }
        }
        if hi - lo < 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(best)
}

enum EsForm {
    /// Keep `x` on the expensive region, `min(x, r)` elsewhere (ns).
    KeepAndCap,
    /// Pay `m` on the expensive region, `r` elsewhere (bd).
    TwoLevel { m: f64 },
}

/// Monotone/general non-constant gamma: parameterize the expensive region by
/// its probability mass `theta`, bind the budget for the cap level, and
/// search `theta` on a log grid with golden-section refinement.
fn solve_es_constrained_search(
    model: &MarketModel,
    spec: &ProblemSpec,
    r_cap: f64,
    form: EsForm,
) -> Result<Candidate> {
    let p = spec.p;
    let x = model.x();
    let mono = model.gamma().monotonicity();

    let region_for = |theta: f64| -> Result<Vec<Interval>> {
        if theta <= 0.0 {
            return Ok(vec![]);
        }
        match mono {
            Monotonicity::Increasing => {
                Ok(vec![Interval::new(x.quantile(1.0 - theta)?, f64::INFINITY)])
            }
            Monotonicity::Decreasing => {
                Ok(vec![Interval::new(f64::NEG_INFINITY, x.quantile(theta)?)])
            }
            _ => {
                // General gamma: take the upper level set whose mass is theta.
                let (lo, hi) = (x.quantile(1e-12)?, x.quantile(1.0 - 1e-12)?);
                let g = |t: f64| model.gamma_at(t);
                let mut g_hi = f64::NEG_INFINITY;
                for i in 0..=512 {
                    let t = lo + (hi - lo) * i as f64 / 512.0;
                    g_hi = g_hi.max(g(t));
                }
                let mass = |c: f64| -> Result<f64> {
                    Ok(upper_level_set(g, c, lo, hi, 1024)?
                        .iter()
                        .map(|iv| x.prob(*iv))
                        .sum())
                };
                let c = find_root(
                    |c| mass(c).map(|t| t - theta).unwrap_or(f64::NAN),
                    model.ess_inf_gamma(),
                    g_hi,
                    1e-12,
                )?;
                upper_level_set(g, c, lo, hi, 1024)
            }
        }
    };

    // Price of the expensive-region exposure as a function of theta.
    let region_price = |theta: f64| -> Result<f64> {
        let region = region_for(theta)?;
        match form {
            EsForm::KeepAndCap => model.expect_gamma_x_indicator(&region),
            EsForm::TwoLevel { m } => Ok(m * model.expect_gamma_indicator(&region)?),
        }
    };

    // Largest region whose exposure alone does not overshoot the budget.
    let theta_cap = 1.0 - 1e-12;
    let theta_max = if spec.x0 <= 0.0 {
        0.0
    } else if region_price(theta_cap)? <= spec.x0 {
        theta_cap
    } else {
        find_root(
            |t| region_price(t).map(|v| v - spec.x0).unwrap_or(f64::NAN),
            1e-15,
            theta_cap,
            1e-14,
        )?
    };

    let evaluate = |theta: f64| -> Result<Candidate> {
        let region = region_for(theta)?;
        let keep_price = region_price(theta)?;
        let target = spec.x0 - keep_price;
        let (segments, c_val, r, lambda) = match form {
            EsForm::KeepAndCap => {
                // Bind the complement budget with the cap r.
                let complement_price = |r: f64| -> Result<f64> {
                    let mut acc = 0.0;
                    for iv in complement_of(&region) {
                        let below = iv.intersect(&Interval::new(f64::NEG_INFINITY, r));
                        let above = iv.intersect(&Interval::new(r, f64::INFINITY));
                        acc += model.expect_gamma_x_indicator(&[below])?;
                        acc += r * model.expect_gamma_indicator(&[above])?;
                    }
                    Ok(acc)
                };
                let r = if target <= 0.0 {
                    0.0
                } else {
                    let mut hi = x.quantile(0.9)?.max(1.0);
                    while complement_price(hi)? < target && hi < 1e12 {
                        hi *= 2.0;
                    }
                    find_root(
                        |r| complement_price(r).map(|v| v - target).unwrap_or(f64::NAN),
                        0.0,
                        hi,
                        1e-13,
                    )?
                };
                let c_val = region_boundary_gamma(model, &region);
                (keep_and_cap_segments(&region, r), c_val, r, 0.0)
            }
            EsForm::TwoLevel { m } => {
                let rest_price = 1.0 - model.expect_gamma_indicator(&region)?;
                let r = if rest_price <= 0.0 {
                    0.0
                } else {
                    (target / rest_price).clamp(0.0, r_cap)
                };
                let c_val = region_boundary_gamma(model, &region);
                (two_level_segments(&region, m, r), c_val, r, r)
            }
        };
        let g = SolutionFunction::new(segments, SolutionMeta::bare("es_search"))?;
        let es = g.es_under(x, p)?;
        Ok(Candidate { es, c: c_val, r, lambda, solution: g })
    };

    // Grid: the pure-cap candidate plus a log-spaced sweep of region masses.
    let mut best = evaluate(0.0)?;
    if theta_max > 0.0 {
        let log_lo = (theta_max * 1e-8).max(1e-14).ln();
        let log_hi = theta_max.ln();
        let mut best_idx = None;
        for i in 0..=GRID_POINTS {
            let theta = (log_lo + (log_hi - log_lo) * i as f64 / GRID_POINTS as f64).exp();
            let cand = evaluate(theta)?;
            if better(&cand, &best) {
                best = cand;
                best_idx = Some(i);
            }
        }
        if let Some(i) = best_idx {
            let lo = (log_lo + (log_hi - log_lo) * (i.saturating_sub(1)) as f64 / GRID_POINTS as f64)
                .exp();
            let hi = (log_lo + (log_hi - log_lo) * ((i + 1).min(GRID_POINTS)) as f64 / GRID_POINTS as f64)
                .exp();
            let (mut llo, mut lhi) = (lo.ln(), hi.ln());
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..REFINE_ITERS {
                let a = lhi - phi * (lhi - llo);
                let b = llo + phi * (lhi - llo);
                let ca = evaluate(a.exp())?;
                let cb = evaluate(b.exp())?;
                if better(&ca, &cb) {
                    lhi = b;
                    if better(&ca, &best) {
                        best = ca;
                    }
                } else {
                    llo = a;
                    if better(&cb, &best) {
                        best = cb;
                    }
                }
                if lhi - llo < 1e-13 {
                    break;
                }
            }
        }
    }
    Ok(best)
}

fn complement_of(region: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut cursor = f64::NEG_INFINITY;
    for iv in region {
        out.push(Interval::new(cursor, iv.lo));
        cursor = iv.hi;
    }
    out.push(Interval::new(cursor, f64::INFINITY));
    out.retain(|iv| !iv.is_empty());
    out
}

fn region_boundary_gamma(model: &MarketModel, region: &[Interval]) -> Option<f64> {
    let b = region.iter().find_map(|iv| {
        if iv.lo.is_finite() {
            Some(iv.lo)
        } else if iv.hi.is_finite() {
            Some(iv.hi)
        } else {
            None
        }
    })?;
    Some(model.gamma_at(b))
}

fn keep_and_cap_segments(region: &[Interval], r: f64) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut cursor = f64::NEG_INFINITY;
    for iv in region {
        if iv.lo > cursor {
            segments.push(Segment { hi: iv.lo, hi_closed: true, piece: Piece::MinWithConst { level: r } });
        }
        segments.push(Segment { hi: iv.hi, hi_closed: false, piece: Piece::Identity });
        cursor = iv.hi;
    }
    if cursor < f64::INFINITY {
        segments.push(Segment {
            hi: f64::INFINITY,
            hi_closed: true,
            piece: Piece::MinWithConst { level: r },
        });
    } else if let Some(last) = segments.last_mut() {
        last.hi_closed = true;
    }
    segments
}

fn two_level_segments(region: &[Interval], m: f64, r: f64) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut cursor = f64::NEG_INFINITY;
    for iv in region {
        if iv.lo > cursor {
            segments.push(Segment { hi: iv.lo, hi_closed: true, piece: Piece::Const { value: r } });
        }
        segments.push(Segment { hi: iv.hi, hi_closed: false, piece: Piece::Const { value: m } });
        cursor = iv.hi;
    }
    if cursor < f64::INFINITY {
        segments.push(Segment { hi: f64::INFINITY, hi_closed: true, piece: Piece::Const { value: r } });
    } else if let Some(last) = segments.last_mut() {
        last.hi_closed = true;
    }
    segments
}
