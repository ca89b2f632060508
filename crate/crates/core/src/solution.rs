//! Piecewise representation of optimized positions `g(X)`.
//!
//! Every solver output is a partition of the real line into segments, each
//! carrying one of four piece shapes. Pieces normalize to affine functions,
//! which gives exact pushforward cdfs (hence exact VaR/ES of `g(Z)` for any
//! parametric law `Z`) and exact budget integrals.

use crate::dist::ScalarDistribution;
use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::numerics::Interval;
use crate::risk::{RiskLevel, RiskMeasure};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    /// `g(x) = x`.
    Identity,
    /// `g(x) = min(x, level)`.
    MinWithConst { level: f64 },
    /// `g(x) = value`.
    Const { value: f64 },
    /// `g(x) = (1 - lambda) x + lambda min(x, cap)`.
    ConvexMix { lambda: f64, cap: f64 },
}

impl Piece {
    fn evaluate(&self, x: f64) -> f64 {
        match *self {
            Piece::Identity => x,
            Piece::MinWithConst { level } => x.min(level),
            Piece::Const { value } => value,
            Piece::ConvexMix { lambda, cap } => (1.0 - lambda) * x + lambda * x.min(cap),
        }
    }
}

/// One segment of the partition: the piece applies on `(previous hi, hi]`
/// when `hi_closed`, `(previous hi, hi)` otherwise. The final segment must
/// have `hi = +inf`.
#[derive(Debug, Clone, Serialize)]
pub struct Segment {
    pub hi: f64,
    pub hi_closed: bool,
    pub piece: Piece,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    /// The problem pins the optimizer a.s.; this is the unique form.
    AlmostSurelyUnique,
    /// One optimizer among possibly many.
    Representative,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Structural metadata recorded by the solvers.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionMeta {
    /// Which solver produced this (e.g. "var_ns", "es_bd", "dro_var_bd").
    pub problem: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Boundary (in x-space) of the region where the position keeps full or
    /// top-level exposure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub jump_locations: Vec<f64>,
    /// Largest discontinuity of the position (0 when continuous).
    pub max_jump: f64,
    /// Optimal objective value at the base model (may be -inf for the
    /// unbounded witnesses).
    pub objective: f64,
    pub budget: f64,
    pub budget_residual: f64,
    pub uniqueness: Uniqueness,
    pub checks: Vec<NamedCheck>,
}

impl SolutionMeta {
    pub fn bare(problem: &str) -> Self {
        SolutionMeta {
            problem: problem.to_string(),
            q: None,
            q_prime: None,
            c: None,
            r: None,
            lambda: None,
            threshold: None,
            jump_locations: Vec::new(),
            max_jump: 0.0,
            objective: f64::NAN,
            budget: f64::NAN,
            budget_residual: f64::NAN,
            uniqueness: Uniqueness::Representative,
            checks: Vec::new(),
        }
    }
}

/// An affine restriction `x -> slope * x + intercept` on a half-open interval.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AffinePiece {
    pub iv: Interval,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionFunction {
    segments: Vec<Segment>,
    pub meta: SolutionMeta,
}

impl SolutionFunction {
    /// Validates that the segments partition the line: strictly increasing
    /// boundaries, final boundary `+inf`. Jump locations are recomputed from
    /// the representation.
    pub fn new(segments: Vec<Segment>, mut meta: SolutionMeta) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::domain("solution needs at least one segment".to_string()));
        }
        if segments.last().expect("non-empty").hi != f64::INFINITY {
            return Err(Error::domain("final segment must extend to +inf".to_string()));
        }
        for w in segments.windows(2) {
            if !(w[0].hi < w[1].hi) {
                return Err(Error::domain(
                    "segment boundaries must be strictly increasing".to_string(),
                ));
            }
        }
        meta.jump_locations = jump_locations(&segments);
        let g = SolutionFunction { segments, meta };
        let mut g = g;
        g.meta.max_jump = g.max_jump();
        Ok(g)
    }

    pub fn constant(value: f64, meta: SolutionMeta) -> Result<Self> {
        SolutionFunction::new(
            vec![Segment { hi: f64::INFINITY, hi_closed: true, piece: Piece::Const { value } }],
            meta,
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        for seg in &self.segments {
            if x < seg.hi || (x == seg.hi && seg.hi_closed) {
                return seg.piece.evaluate(x);
            }
        }
        // Unreachable: the final segment has hi = +inf.
        self.segments.last().expect("non-empty").piece.evaluate(x)
    }

    pub fn apply(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.evaluate(x)).collect()
    }

    pub fn jump_locations(&self) -> &[f64] {
        &self.meta.jump_locations
    }

    pub fn is_continuous(&self) -> bool {
        self.meta.jump_locations.is_empty()
    }

    /// All shipped piece shapes have bounded slope, so continuous solutions
    /// are automatically linearly growing.
    pub fn has_linear_growth(&self) -> bool {
        true
    }

    pub fn max_jump(&self) -> f64 {
        let mut m: f64 = 0.0;
        for w in self.segments.windows(2) {
            let b = w[0].hi;
            let left = w[0].piece.evaluate(b);
            let right = w[1].piece.evaluate(b);
            m = m.max((right - left).abs());
        }
        m
    }

    /// Affine normal form of the whole function.
    pub(crate) fn affine_pieces(&self) -> Vec<AffinePiece> {
        let mut out = Vec::new();
        let mut lo = f64::NEG_INFINITY;
        for seg in &self.segments {
            let iv = Interval::new(lo, seg.hi);
            append_affine(&mut out, iv, &seg.piece);
            lo = seg.hi;
        }
        out
    }

    /// Affine normal form of `x -> g(in_slope * x + in_shift)`, used to
    /// evaluate the position under coupled perturbations `Z = aX + d`
    /// without leaving closed form.
    pub(crate) fn affine_pieces_precomposed(&self, in_slope: f64, in_shift: f64) -> Vec<AffinePiece> {
        assert!(in_slope > 0.0, "input transform must be increasing");
        self.affine_pieces()
            .into_iter()
            .map(|p| AffinePiece {
                iv: Interval::new(
                    (p.iv.lo - in_shift) / in_slope,
                    (p.iv.hi - in_shift) / in_slope,
                ),
                slope: p.slope * in_slope,
                intercept: p.intercept + p.slope * in_shift,
            })
            .collect()
    }

    /// `P(g(law) <= t)`, exact.
    pub fn pushforward_cdf(&self, law: &ScalarDistribution, t: f64) -> f64 {
        cdf_of_affine(&self.affine_pieces(), law, t)
    }

    /// Left p-quantile of `g(law)`, exact up to bisection at 1e-13.
    pub fn var_under(&self, law: &ScalarDistribution, p: RiskLevel) -> Result<f64> {
        var_of_affine(&self.affine_pieces(), law, p)
    }

    /// `ES_p(g(law))` via the tail-excess identity
    /// `ES_p = v + E[(g - v)^+]/(1-p)` at the p-quantile `v`; exact, and
    /// `+inf` when the tail expectation diverges.
    pub fn es_under(&self, law: &ScalarDistribution, p: RiskLevel) -> Result<f64> {
        es_of_affine(&self.affine_pieces(), law, p)
    }

    pub fn risk_under(
        &self,
        law: &ScalarDistribution,
        rho: RiskMeasure,
        p: RiskLevel,
    ) -> Result<f64> {
        match rho {
            RiskMeasure::Var => self.var_under(law, p),
            RiskMeasure::Es => self.es_under(law, p),
        }
    }

    /// Risk of `g(aX + d)` when `X ~ law`, for `a > 0`.
    pub fn risk_under_affine_input(
        &self,
        law: &ScalarDistribution,
        in_slope: f64,
        in_shift: f64,
        rho: RiskMeasure,
        p: RiskLevel,
    ) -> Result<f64> {
        let pieces = self.affine_pieces_precomposed(in_slope, in_shift);
        match rho {
            RiskMeasure::Var => var_of_affine(&pieces, law, p),
            RiskMeasure::Es => es_of_affine(&pieces, law, p),
        }
    }

    /// `E[gamma(X) g(X)]`, exact through the model's moment primitives.
    pub fn budget_under(&self, model: &MarketModel) -> Result<f64> {
        let mut acc = 0.0;
        for p in self.affine_pieces() {
            if p.iv.is_empty() {
                continue;
            }
            if p.slope != 0.0 {
                acc += p.slope * model.expect_gamma_x_on(p.iv)?;
            }
            if p.intercept != 0.0 {
                acc += p.intercept * model.expect_gamma_on(p.iv)?;
            }
        }
        Ok(acc)
    }

    /// `E[g(X)]` under a bare law.
    pub fn mean_under(&self, law: &ScalarDistribution) -> f64 {
        let mut acc = 0.0;
        for p in self.affine_pieces() {
            if p.iv.is_empty() {
                continue;
            }
            acc += p.slope * law.partial_mean(p.iv) + p.intercept * law.prob(p.iv);
        }
        acc
    }

    /// Largest value of `g` on the closed window `[lo, hi]`, up to the
    /// half-open boundary convention (a supremum approached at an open
    /// boundary is evaluated a hair inside).
    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        let mut candidates = vec![lo, hi];
        for seg in &self.segments {
            if seg.hi >= lo && seg.hi <= hi && seg.hi.is_finite() {
                candidates.push(seg.hi);
                let eps = 1e-12 * (1.0 + seg.hi.abs());
                candidates.push(seg.hi - eps);
                candidates.push((seg.hi + eps).min(hi));
            }
        }
        // Interior kinks of the capped pieces.
        for p in self.affine_pieces() {
            for b in [p.iv.lo, p.iv.hi] {
                if b.is_finite() && b >= lo && b <= hi {
                    candidates.push(b);
                }
            }
        }
        candidates
            .into_iter()
            .filter(|x| *x >= lo && *x <= hi)
            .map(|x| self.evaluate(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn append_affine(out: &mut Vec<AffinePiece>, iv: Interval, piece: &Piece) {
    if iv.is_empty() {
        return;
    }
    match *piece {
        Piece::Identity => out.push(AffinePiece { iv, slope: 1.0, intercept: 0.0 }),
        Piece::Const { value } => out.push(AffinePiece { iv, slope: 0.0, intercept: value }),
        Piece::MinWithConst { level } => {
            let below = iv.intersect(&Interval::new(f64::NEG_INFINITY, level));
            let above = iv.intersect(&Interval::new(level, f64::INFINITY));
            if !below.is_empty() {
                out.push(AffinePiece { iv: below, slope: 1.0, intercept: 0.0 });
            }
            if !above.is_empty() {
                out.push(AffinePiece { iv: above, slope: 0.0, intercept: level });
            }
        }
        Piece::ConvexMix { lambda, cap } => {
            let below = iv.intersect(&Interval::new(f64::NEG_INFINITY, cap));
            let above = iv.intersect(&Interval::new(cap, f64::INFINITY));
            if !below.is_empty() {
                out.push(AffinePiece { iv: below, slope: 1.0, intercept: 0.0 });
            }
            if !above.is_empty() {
                out.push(AffinePiece {
                    iv: above,
                    slope: 1.0 - lambda,
                    intercept: lambda * cap,
                });
            }
        }
    }
}

fn jump_locations(segments: &[Segment]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in segments.windows(2) {
        let b = w[0].hi;
        if !b.is_finite() {
            continue;
        }
        let left = w[0].piece.evaluate(b);
        let right = w[1].piece.evaluate(b);
        if (right - left).abs() > 1e-12 * (1.0 + left.abs().max(right.abs())) {
            out.push(b);
        }
    }
    out
}

pub(crate) fn cdf_of_affine(pieces: &[AffinePiece], law: &ScalarDistribution, t: f64) -> f64 {
    let mut acc = 0.0;
    for p in pieces {
        if p.iv.is_empty() {
            continue;
        }
        if p.slope > 0.0 {
            let cut = (t - p.intercept) / p.slope;
            acc += law.prob(p.iv.intersect(&Interval::new(f64::NEG_INFINITY, cut)));
        } else if p.slope < 0.0 {
            let cut = (t - p.intercept) / p.slope;
            acc += law.prob(p.iv.intersect(&Interval::new(cut, f64::INFINITY)));
        } else if p.intercept <= t {
            acc += law.prob(p.iv);
        }
    }
    acc.min(1.0)
}

pub(crate) fn var_of_affine(
    pieces: &[AffinePiece],
    law: &ScalarDistribution,
    p: RiskLevel,
) -> Result<f64> {
    let p = p.value();
    // Bracket from the attainable value range.
    let (xlo, xhi) = (law.quantile(1e-15)?, law.quantile(1.0 - 1e-15)?);
    let mut vlo = f64::INFINITY;
    let mut vhi = f64::NEG_INFINITY;
    for piece in pieces {
        let a = piece.iv.lo.max(xlo);
        let b = piece.iv.hi.min(xhi);
        if !(a <= b) {
            continue;
        }
        for x in [a, b] {
            let v = piece.slope * x + piece.intercept;
            vlo = vlo.min(v);
            vhi = vhi.max(v);
        }
    }
    if !vlo.is_finite() || !vhi.is_finite() {
        return Err(Error::numeric("pushforward quantile bracket is unbounded".to_string()));
    }
    let (mut lo, mut hi) = (vlo - 1.0, vhi + 1.0);
    // F(lo) = 0 < p <= F(hi); bisection keeps F(hi) >= p, converging to the
    // left quantile.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf_of_affine(pieces, law, mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(hi)
}

pub(crate) fn es_of_affine(
    pieces: &[AffinePiece],
    law: &ScalarDistribution,
    p: RiskLevel,
) -> Result<f64> {
    let v = var_of_affine(pieces, law, p)?;
    let mut excess = 0.0;
    for piece in pieces {
        if piece.iv.is_empty() {
            continue;
        }
        let region = if piece.slope > 0.0 {
            piece.iv.intersect(&Interval::new((v - piece.intercept) / piece.slope, f64::INFINITY))
        } else if piece.slope < 0.0 {
            piece
                .iv
                .intersect(&Interval::new(f64::NEG_INFINITY, (v - piece.intercept) / piece.slope))
        } else if piece.intercept > v {
            piece.iv
        } else {
            continue;
        };
        if region.is_empty() {
            continue;
        }
        let part = piece.slope * law.partial_mean(region) + (piece.intercept - v) * law.prob(region);
        if part.is_infinite() {
            return Ok(f64::INFINITY);
        }
        excess += part.max(0.0);
    }
    Ok(v + excess / (1.0 - p.value()))
}
