//! VaR optimizers for the three constraint sets.
//!
//! Complete market: the objective is unbounded below, certified by an
//! explicit two-level witness family. No-short-selling and bounded: the
//! optimizer keeps full (resp. top-level) exposure on an upper set of
//! states ranked by `(x - q) gamma(x)` (resp. `gamma(x)`), with the level
//! `q` pinned by the binding budget.

use crate::error::{Error, Result};
use crate::market::{MarketModel, Monotonicity};
use crate::numerics::{find_root, upper_level_set, Interval};
use crate::problem::{ConstraintKind, ProblemSpec};
use crate::solution::{NamedCheck, Piece, Segment, SolutionFunction, SolutionMeta, Uniqueness};
use crate::witness::{WitnessElement, WitnessSequence};

fn require_constraint(spec: &ProblemSpec, expected: ConstraintKind) -> Result<()> {
    if spec.constraint != expected {
        return Err(Error::domain(format!(
            "solver expects {expected:?} constraint, got {:?}",
            spec.constraint
        )));
    }
    Ok(())
}

fn require_continuous_model(model: &MarketModel) -> Result<()> {
    if !model.x().has_positive_density() {
        return Err(Error::assumption(
            "model_regularity",
            "the solvers require a continuously distributed economic scalar",
        ));
    }
    Ok(())
}

/// One element of the complete-market witness family: a two-level position
/// worth exactly `x0` whose VaR equals the prescribed `d`.
pub fn var_cm_witness(model: &MarketModel, spec: &ProblemSpec, d: f64) -> Result<SolutionFunction> {
    require_constraint(spec, ConstraintKind::CompleteMarket)?;
    require_continuous_model(model)?;
    let p = spec.p;
    let y = model.x().quantile(p.value())?;
    let tail_price = model.expect_gamma_indicator(&[Interval::new(y, f64::INFINITY)])?;
    if !(tail_price > 0.0) {
        return Err(Error::numeric(format!(
            "upper-tail price E[gamma 1(X > {y})] = {tail_price} is not positive"
        )));
    }
    let upper = d + (spec.x0 - d) / tail_price;
    let mut meta = SolutionMeta::bare("var_cm_witness");
    meta.objective = d;
    meta.threshold = Some(y);
    meta.uniqueness = Uniqueness::Representative;
    let g = SolutionFunction::new(
        vec![
            Segment { hi: y, hi_closed: true, piece: Piece::Const { value: d } },
            Segment { hi: f64::INFINITY, hi_closed: true, piece: Piece::Const { value: upper } },
        ],
        meta,
    )?;
    let budget = g.budget_under(model)?;
    let mut g = g;
    g.meta.budget = budget;
    g.meta.budget_residual = budget - spec.x0;
    g.meta.checks.push(NamedCheck {
        name: "budget_equality".to_string(),
        passed: (budget - spec.x0).abs() <= 1e-8,
        detail: format!("E[gamma g(X)] = {budget:.17e}, target {:.17e}", spec.x0),
    });
    Ok(g)
}

/// The full certificate: levels `ds` (descending) yield feasible positions
/// with `VaR_p = d`, so the infimum over the complete-market class is -inf
/// and no optimizer exists.
pub fn var_cm_witness_sequence(
    model: &MarketModel,
    spec: &ProblemSpec,
    ds: &[f64],
) -> Result<WitnessSequence> {
    let mut elements = Vec::with_capacity(ds.len());
    for &d in ds {
        let solution = var_cm_witness(model, spec, d)?;
        elements.push(WitnessElement { param: d, objective: d, solution });
    }
    Ok(WitnessSequence {
        description: "budget-neutral two-level positions with VaR equal to the sliding level"
            .to_string(),
        elements,
    })
}

/// Splits `[0, cap]` into the region layout of a no-short-selling solution
/// given the kept (full-exposure) intervals.
fn ns_segments_from_regions(kept: &[Interval], level: f64) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut cursor = f64::NEG_INFINITY;
    for iv in kept {
        if iv.lo > cursor {
            segments.push(Segment {
                hi: iv.lo,
                hi_closed: true,
                piece: Piece::MinWithConst { level },
            });
        }
        segments.push(Segment { hi: iv.hi, hi_closed: false, piece: Piece::Identity });
        cursor = iv.hi;
    }
    if cursor < f64::INFINITY {
        segments.push(Segment {
            hi: f64::INFINITY,
            hi_closed: true,
            piece: Piece::MinWithConst { level },
        });
    } else if let Some(last) = segments.last_mut() {
        last.hi_closed = true;
    }
    segments
}

/// Budget of the candidate no-short-selling shape: full exposure on `kept`,
/// `min(x, q)` elsewhere.
fn ns_budget(model: &MarketModel, kept: &[Interval], q: f64) -> Result<f64> {
    let mut acc = model.expect_gamma_x_indicator(kept)?;
    // Complement of the kept intervals, assembled left to right.
    let mut cursor = f64::NEG_INFINITY;
    let mut complement = Vec::new();
    for iv in kept {
        complement.push(Interval::new(cursor, iv.lo));
        cursor = iv.hi;
    }
    complement.push(Interval::new(cursor, f64::INFINITY));
    for iv in complement {
        if iv.is_empty() {
            continue;
        }
        let below = iv.intersect(&Interval::new(f64::NEG_INFINITY, q));
        let above = iv.intersect(&Interval::new(q, f64::INFINITY));
        acc += model.expect_gamma_x_indicator(&[below])?;
        acc += q * model.expect_gamma_indicator(&[above])?;
    }
    Ok(acc)
}

/// VaR of `(x - q) gamma(x)` and its upper level region, for general gamma.
fn ranked_region_general(
    model: &MarketModel,
    p: f64,
    q: f64,
) -> Result<(f64, Vec<Interval>)> {
    let x = model.x();
    let (lo, hi) = (x.quantile(1e-12)?, x.quantile(1.0 - 1e-12)?);
    let w = |t: f64| (t - q) * model.gamma_at(t);
    // c = VaR_p(W): P(W > c) = 1 - p, with P computed from the level sets.
    let mut w_hi = f64::NEG_INFINITY;
    for i in 0..=512 {
        let t = lo + (hi - lo) * i as f64 / 512.0;
        w_hi = w_hi.max(w(t));
    }
    let tail_prob = |c: f64| -> Result<f64> {
        let ivs = upper_level_set(w, c, lo, hi, 2048)?;
        Ok(ivs.iter().map(|iv| x.prob(*iv)).sum())
    };
    let c = find_root(
        |c| tail_prob(c).map(|t| t - (1.0 - p)).unwrap_or(f64::NAN),
        0.0,
        w_hi,
        1e-12,
    )?;
    let region = upper_level_set(w, c, lo, hi, 2048)?;
    Ok((c, region))
}

/// No-short-selling VaR problem. Returns the solved position; `q = 0` when
/// the tail price is rich enough to hedge fully, otherwise the unique shape
/// with `q` pinned by the binding budget.
pub fn solve_var_ns(model: &MarketModel, spec: &ProblemSpec) -> Result<SolutionFunction> {
    require_constraint(spec, ConstraintKind::NoShortSelling)?;
    require_continuous_model(model)?;
    let p = spec.p.value();
    let x = model.x();
    let full_price = model.expect_gamma_x()?;
    if spec.x0 >= full_price {
        return Err(Error::domain(format!(
            "budget infeasible: x0 = {} >= E[gamma X] = {full_price}",
            spec.x0
        )));
    }

    let x_p = x.quantile(p)?;
    let es_gamma_x = model.es_of_gamma_x(p)?;
    let monotone = matches!(
        model.gamma().monotonicity(),
        Monotonicity::Constant | Monotonicity::Increasing
    );

    if es_gamma_x >= spec.x0 / (1.0 - p) {
        // Fully hedged case: zero VaR, keep exposure on the top-ranked set.
        let (c, kept) = if monotone {
            ((x_p - 0.0) * model.gamma_at(x_p), vec![Interval::new(x_p, f64::INFINITY)])
        } else {
            ranked_region_general(model, p, 0.0)?
        };
        let mut meta = SolutionMeta::bare("var_ns");
        meta.q = Some(0.0);
        meta.c = Some(c);
        meta.threshold = kept.first().map(|iv| iv.lo);
        meta.objective = 0.0;
        meta.uniqueness = Uniqueness::Representative;
        let mut g = SolutionFunction::new(ns_segments_from_regions(&kept, 0.0), meta)?;
        let budget = g.budget_under(model)?;
        g.meta.budget = budget;
        g.meta.budget_residual = (budget - spec.x0).max(0.0);
        g.meta.checks.push(NamedCheck {
            name: "budget_feasible".to_string(),
            passed: budget >= spec.x0 - 1e-10,
            detail: format!(
                "E[gamma g(X)] = {budget:.12e} >= x0 = {:.12e}; tail price covers the budget, so the budget need not bind",
                spec.x0
            ),
        });
        return Ok(g);
    }

    let (q, c, kept, root_multiplicity) = if monotone {
        // The kept region is the upper-p tail of X for every q in [0, VaR_p(X)):
        // on x > q both factors of (x - q) gamma(x) are positive and increasing,
        // so the level c = VaR_p((X-q)gamma) is attained exactly at x = VaR_p(X).
        let kept = vec![Interval::new(x_p, f64::INFINITY)];
        let q = find_root(
            |q| ns_budget(model, &kept, q).map(|b| b - spec.x0).unwrap_or(f64::NAN),
            0.0,
            x_p,
            1e-12,
        )?;
        let c = (x_p - q) * model.gamma_at(x_p);
        (q, c, kept, 1usize)
    } else {
        // General gamma: scan q for budget roots; the smallest root is the
        // optimum when several exist.
        let grid = 128;
        let mut roots = Vec::new();
        let mut prev_q = 0.0;
        let mut prev_res = {
            let (_, kept0) = ranked_region_general(model, p, 0.0)?;
            ns_budget(model, &kept0, 0.0)? - spec.x0
        };
        for i in 1..=grid {
            let qi = x_p * i as f64 / (grid as f64 + 0.5);
            let (_, kept_i) = ranked_region_general(model, p, qi)?;
            let res = ns_budget(model, &kept_i, qi)? - spec.x0;
            if prev_res == 0.0 || prev_res.signum() != res.signum() {
                let root = find_root(
                    |q| {
                        ranked_region_general(model, p, q)
                            .and_then(|(_, kept)| ns_budget(model, &kept, q))
                            .map(|b| b - spec.x0)
                            .unwrap_or(f64::NAN)
                    },
                    prev_q,
                    qi,
                    1e-11,
                )?;
                roots.push(root);
            }
            prev_q = qi;
            prev_res = res;
        }
        if roots.is_empty() {
            return Err(Error::numeric(format!(
                "no budget root found on [0, {x_p}); residual at upper end {prev_res:.3e}"
            )));
        }
        let q = roots[0];
        let (c, kept) = ranked_region_general(model, p, q)?;
        (q, c, kept, roots.len())
    };

    let mut meta = SolutionMeta::bare("var_ns");
    meta.q = Some(q);
    meta.c = Some(c);
    meta.threshold = kept.first().map(|iv| iv.lo);
    meta.objective = q;
    meta.uniqueness = if root_multiplicity == 1 {
        Uniqueness::AlmostSurelyUnique
    } else {
        Uniqueness::Representative
    };
    let mut g = SolutionFunction::new(ns_segments_from_regions(&kept, q), meta)?;

    let budget = g.budget_under(model)?;
    g.meta.budget = budget;
    g.meta.budget_residual = budget - spec.x0;
    let kept_prob: f64 = kept.iter().map(|iv| x.prob(*iv)).sum();
    g.meta.checks.push(NamedCheck {
        name: "budget_binding".to_string(),
        passed: (budget - spec.x0).abs() <= 1e-8,
        detail: format!("E[gamma g(X)] = {budget:.17e}, target {:.17e}", spec.x0),
    });
    g.meta.checks.push(NamedCheck {
        name: "level_below_var_of_x".to_string(),
        passed: q < x_p,
        detail: format!("q = {q:.12e} < VaR_p(X) = {x_p:.12e}"),
    });
    g.meta.checks.push(NamedCheck {
        name: "quantile_continuity_ns".to_string(),
        passed: (kept_prob - (1.0 - p)).abs() <= 1e-6,
        detail: format!(
            "P((X-q)gamma > c) = {kept_prob:.10} vs 1-p = {:.10}",
            1.0 - p
        ),
    });
    if root_multiplicity > 1 {
        g.meta.checks.push(NamedCheck {
            name: "root_multiplicity".to_string(),
            passed: false,
            detail: format!(
                "{root_multiplicity} budget roots found; returned the smallest"
            ),
        });
    }
    Ok(g)
}

/// Region `{gamma > VaR_p(gamma)}` for non-constant gamma, with the level.
fn gamma_upper_region(model: &MarketModel, p: f64) -> Result<(f64, Vec<Interval>)> {
    let x = model.x();
    match model.gamma().monotonicity() {
        Monotonicity::Increasing => {
            let t = x.quantile(p)?;
            Ok((model.gamma_at(t), vec![Interval::new(t, f64::INFINITY)]))
        }
        Monotonicity::Decreasing => {
            let t = x.quantile(1.0 - p)?;
            Ok((model.gamma_at(t), vec![Interval::new(f64::NEG_INFINITY, t)]))
        }
        Monotonicity::Constant => Err(Error::assumption(
            "quantile_continuity_bd",
            "gamma is constant: P(gamma <= VaR_p(gamma)) = 1 != p",
        )),
        Monotonicity::General => {
            let (lo, hi) = (x.quantile(1e-12)?, x.quantile(1.0 - 1e-12)?);
            let g = |t: f64| model.gamma_at(t);
            let mut g_hi = f64::NEG_INFINITY;
            for i in 0..=512 {
                let t = lo + (hi - lo) * i as f64 / 512.0;
                g_hi = g_hi.max(g(t));
            }
            let tail_prob = |c: f64| -> Result<f64> {
                let ivs = upper_level_set(g, c, lo, hi, 2048)?;
                Ok(ivs.iter().map(|iv| x.prob(*iv)).sum())
            };
            let c = find_root(
                |c| tail_prob(c).map(|t| t - (1.0 - p)).unwrap_or(f64::NAN),
                0.0,
                g_hi,
                1e-12,
            )?;
            Ok((c, upper_level_set(g, c, lo, hi, 2048)?))
        }
    }
}

fn bd_segments_from_regions(top: &[Interval], m: f64, low: f64) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut cursor = f64::NEG_INFINITY;
    for iv in top {
        if iv.lo > cursor {
            segments.push(Segment { hi: iv.lo, hi_closed: true, piece: Piece::Const { value: low } });
        }
        segments.push(Segment { hi: iv.hi, hi_closed: false, piece: Piece::Const { value: m } });
        cursor = iv.hi;
    }
    if cursor < f64::INFINITY {
        segments.push(Segment {
            hi: f64::INFINITY,
            hi_closed: true,
            piece: Piece::Const { value: low },
        });
    } else if let Some(last) = segments.last_mut() {
        last.hi_closed = true;
    }
    segments
}

/// Bounded VaR problem: the optimizer pays the cap `m` on the expensive
/// states `{gamma > VaR_p(gamma)}` and a flat `q'` elsewhere.
pub fn solve_var_bd(model: &MarketModel, spec: &ProblemSpec) -> Result<SolutionFunction> {
    require_constraint(spec, ConstraintKind::Bounded)?;
    require_continuous_model(model)?;
    let p = spec.p.value();
    let m = spec.bound()?;
    let es_gamma = model.es_of_gamma(p)?;

    if m * es_gamma >= spec.x0 / (1.0 - p) {
        // Fully hedged: pay m on a top-price set of mass 1-p, zero elsewhere.
        let (c, top) = match gamma_upper_region(model, p) {
            Ok(pair) => pair,
            Err(_) => {
                // Constant gamma: any set of mass 1-p works; use the upper
                // tail of X as the representative.
                let t = model.x().quantile(p)?;
                (model.gamma_at(t), vec![Interval::new(t, f64::INFINITY)])
            }
        };
        let mut meta = SolutionMeta::bare("var_bd");
        meta.q_prime = Some(0.0);
        meta.c = Some(c);
        meta.threshold = top.first().map(|iv| iv.lo);
        meta.objective = 0.0;
        meta.uniqueness = Uniqueness::Representative;
        let mut g = SolutionFunction::new(bd_segments_from_regions(&top, m, 0.0), meta)?;
        let budget = g.budget_under(model)?;
        g.meta.budget = budget;
        g.meta.budget_residual = (budget - spec.x0).max(0.0);
        g.meta.checks.push(NamedCheck {
            name: "budget_feasible".to_string(),
            passed: budget >= spec.x0 - 1e-10,
            detail: format!("E[gamma g(X)] = {budget:.12e} >= x0 = {:.12e}", spec.x0),
        });
        return Ok(g);
    }

    // q' > 0 requires the gamma quantile to be flat at p, which fails for
    // constant gamma.
    let (c, top) = gamma_upper_region(model, p)?;
    let top_price = model.expect_gamma_indicator(&top)?;
    let rest_price = 1.0 - top_price;
    if rest_price <= 0.0 {
        return Err(Error::numeric(format!(
            "degenerate split: E[gamma 1(top)] = {top_price}"
        )));
    }
    let q_prime = (spec.x0 - m * top_price) / rest_price;
    if !(q_prime > 0.0) {
        return Err(Error::assumption(
            "quantile_continuity_bd",
            format!("solved flat level q' = {q_prime:.6e} is not positive"),
        ));
    }
    debug_assert!(q_prime < m);

    let top_prob: f64 = top.iter().map(|iv| model.x().prob(*iv)).sum();
    let mut meta = SolutionMeta::bare("var_bd");
    meta.q_prime = Some(q_prime);
    meta.c = Some(c);
    meta.threshold = top.first().map(|iv| iv.lo);
    meta.objective = q_prime;
    meta.uniqueness = Uniqueness::AlmostSurelyUnique;
    let mut g = SolutionFunction::new(bd_segments_from_regions(&top, m, q_prime), meta)?;
    let budget = g.budget_under(model)?;
    g.meta.budget = budget;
    g.meta.budget_residual = budget - spec.x0;
    g.meta.checks.push(NamedCheck {
        name: "budget_binding".to_string(),
        passed: (budget - spec.x0).abs() <= 1e-8,
        detail: format!("E[gamma g(X)] = {budget:.17e}, target {:.17e}", spec.x0),
    });
    g.meta.checks.push(NamedCheck {
        name: "quantile_continuity_bd".to_string(),
        passed: (top_prob - (1.0 - p)).abs() <= 1e-6,
        detail: format!("P(gamma > c) = {top_prob:.10} vs 1-p = {:.10}", 1.0 - p),
    });
    Ok(g)
}
