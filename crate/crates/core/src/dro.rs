//! Worst-case VaR over a sup-norm ball of models, bounded constraint set.
//!
//! Under the shape assumptions (p >= 1/2, nonincreasing density, strictly
//! increasing pricing density, positive solved level) the optimizer of
//! `sup{VaR_p(g(Y)) : ||Y - X||_inf <= eps}` pays the cap beyond
//! `VaR_p(X) + eps` and a flat `q` below, with `q` from the binding budget.
//! The worst case equals `q`: no admissible model can push more than `1 - p`
//! of its mass past the widened threshold.

use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::numerics::Interval;
use crate::problem::{ConstraintKind, ProblemSpec};
use crate::risk::RiskLevel;
use crate::sampling::{open_unit, stream};
use crate::solution::{
    var_of_affine, AffinePiece, NamedCheck, Piece, Segment, SolutionFunction, SolutionMeta,
    Uniqueness,
};
use serde::Serialize;

/// A bounded-constraint problem together with the radius of the sup-norm
/// uncertainty ball.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DroSpec {
    pub base: ProblemSpec,
    pub epsilon: f64,
}

impl DroSpec {
    pub fn new(base: ProblemSpec, epsilon: f64) -> Result<Self> {
        if base.constraint != ConstraintKind::Bounded {
            return Err(Error::domain(
                "worst-case solver is defined for the bounded constraint set".to_string(),
            ));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::domain(format!("ball radius must be positive, got {epsilon}")));
        }
        Ok(DroSpec { base, epsilon })
    }
}

/// Solves the worst-case problem and records the certificate
/// `sup VaR_p(g(Y)) = q` in the metadata.
pub fn solve_dro_var_bd(model: &MarketModel, spec: &DroSpec) -> Result<SolutionFunction> {
    let p = spec.base.p.value();
    let m = spec.base.bound()?;
    let report = model.check_assumptions(p)?;
    if !report.worst_case_shape.holds_now() {
        return Err(Error::assumption(
            "worst_case_shape",
            report.worst_case_shape.detail.clone(),
        ));
    }
    let c = model.x().quantile(p)?;
    let threshold = c + spec.epsilon;
    let top_price = model.expect_gamma_indicator(&[Interval::new(threshold, f64::INFINITY)])?;
    let rest_price = 1.0 - top_price;
    if rest_price <= 0.0 {
        return Err(Error::numeric(format!(
            "degenerate split: E[gamma 1(X > {threshold})] = {top_price}"
        )));
    }
    let q = (spec.base.x0 - m * top_price) / rest_price;
    if !(q > 0.0) {
        return Err(Error::assumption(
            "worst_case_shape",
            format!("solved flat level q = {q:.6e} is not positive"),
        ));
    }

    let mut meta = SolutionMeta::bare("dro_var_bd");
    meta.q = Some(q);
    meta.c = Some(c);
    meta.threshold = Some(threshold);
    meta.objective = q;
    meta.uniqueness = Uniqueness::Representative;
    let mut g = SolutionFunction::new(
        vec![
            Segment { hi: threshold, hi_closed: true, piece: Piece::Const { value: q } },
            Segment { hi: f64::INFINITY, hi_closed: true, piece: Piece::Const { value: m } },
        ],
        meta,
    )?;
    let budget = g.budget_under(model)?;
    g.meta.budget = budget;
    g.meta.budget_residual = budget - spec.base.x0;
    g.meta.checks.push(NamedCheck {
        name: "budget_binding".to_string(),
        passed: (budget - spec.base.x0).abs() <= 1e-8,
        detail: format!("E[gamma g(X)] = {budget:.17e}, target {:.17e}", spec.base.x0),
    });
    g.meta.checks.push(NamedCheck {
        name: "worst_case_certificate".to_string(),
        passed: true,
        detail: format!(
            "P(Y > {threshold:.12e}) <= P(X > {c:.12e}) = {:.6} for every model within {:.3e}, so sup VaR = q = {q:.12e}",
            1.0 - p,
            spec.epsilon
        ),
    });
    Ok(g)
}

/// Lower-bounds `sup{VaR_p(g(Y)) : ||Y - X||_inf <= eps}` by exact evaluation
/// of structured adversaries (uniform shifts, nearest-point pushes across
/// each jump of `g`) plus `n_adversarial` random piecewise-shift transports.
/// Every adversary is a deterministic transport map of `X`, so its pushforward
/// VaR is computed in closed form rather than from finite samples.
pub fn worst_case_var(
    model: &MarketModel,
    g: &SolutionFunction,
    p: RiskLevel,
    epsilon: f64,
    n_adversarial: usize,
    seed: u64,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!("ball radius must be positive, got {epsilon}")));
    }
    let x = model.x();
    let mut best = g.var_under(x, p)?;

    // Constant shifts to both edges of the ball.
    for delta in [epsilon, -epsilon] {
        let pieces = g.affine_pieces_precomposed(1.0, delta);
        best = best.max(var_of_affine(&pieces, x, p)?);
    }

    // Jump adversaries: push the band just below each jump of g across it.
    for &b in g.jump_locations() {
        let pieces = banded_shift_pieces(g, &[(b - epsilon, b, epsilon)]);
        best = best.max(var_of_affine(&pieces, x, p)?);
    }

    // Random piecewise-constant transports: partition the support at random
    // quantiles, shift each band by an independent uniform step in the ball.
    let mut rng = stream(seed, 0);
    for _ in 0..n_adversarial {
        let k = 1 + (open_unit(&mut rng) * 4.0) as usize;
        let mut cuts: Vec<f64> = (0..k)
            .map(|_| x.quantile(open_unit(&mut rng)).expect("u in (0,1)"))
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        cuts.dedup();
        let mut bands = Vec::with_capacity(cuts.len() + 1);
        let mut lo = f64::NEG_INFINITY;
        for &cut in cuts.iter().chain(std::iter::once(&f64::INFINITY)) {
            let delta = (2.0 * open_unit(&mut rng) - 1.0) * epsilon;
            bands.push((lo, cut, delta));
            lo = cut;
        }
        let pieces = banded_shift_pieces(g, &bands);
        best = best.max(var_of_affine(&pieces, x, p)?);
    }
    Ok(best)
}

/// Affine pieces of `x -> g(y(x))` where `y` shifts band `(lo, hi]` by its
/// `delta` and leaves everything else in place. Bands must be disjoint;
/// uncovered regions are identity.
fn banded_shift_pieces(g: &SolutionFunction, bands: &[(f64, f64, f64)]) -> Vec<AffinePiece> {
    let mut out = Vec::new();
    let mut covered: Vec<(f64, f64)> = Vec::new();
    for &(lo, hi, delta) in bands {
        let band = Interval::new(lo, hi);
        if band.is_empty() {
            continue;
        }
        covered.push((lo, hi));
        for p in g.affine_pieces_precomposed(1.0, delta) {
            let clipped = p.iv.intersect(&band);
            if !clipped.is_empty() {
                out.push(AffinePiece { iv: clipped, ..p });
            }
        }
    }
    // Identity transport outside the bands.
    covered.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let mut cursor = f64::NEG_INFINITY;
    let mut gaps = Vec::new();
    for (lo, hi) in covered {
        gaps.push(Interval::new(cursor, lo));
        cursor = cursor.max(hi);
    }
    gaps.push(Interval::new(cursor, f64::INFINITY));
    for gap in gaps {
        if gap.is_empty() {
            continue;
        }
        for p in g.affine_pieces() {
            let clipped = p.iv.intersect(&gap);
            if !clipped.is_empty() {
                out.push(AffinePiece { iv: clipped, ..p });
            }
        }
    }
    out
}
