//! The two tail risk measures on distributions and on samples.
//!
//! Losses are positive. `var` is the left p-quantile
//! `inf{x : P(Y <= x) >= p}`; `es` is the tail average
//! `(1/(1-p)) * integral_p^1 var_u(Y) du`, which may be `+inf` for laws with
//! a non-integrable upper tail. `+inf` is a regular value, not an error.

use crate::dist::ScalarDistribution;
use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::numerics::integrate;
use serde::Serialize;

/// A confidence level strictly inside (0, 1). Level 1 is served by
/// [`ess_sup_of_samples`] instead, matching the convention that both measures
/// degenerate to the essential supremum there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskLevel(f64);

impl RiskLevel {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!(
                "confidence level must lie strictly inside (0,1), got {p}"
            )));
        }
        Ok(RiskLevel(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which of the two measures an experiment optimizes or probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMeasure {
    Var,
    Es,
}

pub fn var_of_dist(dist: &ScalarDistribution, p: RiskLevel) -> Result<f64> {
    dist.quantile(p.value())
}

pub fn es_of_dist(dist: &ScalarDistribution, p: RiskLevel) -> Result<f64> {
    dist.es(p.value())
}

fn sorted_copy(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::domain("risk measure of an empty sample".to_string()));
    }
    let mut ys = samples.to_vec();
    ys.sort_by(|a, b| a.partial_cmp(b).ok_or(()).expect("samples must not contain NaN"));
    Ok(ys)
}

/// Index (1-based) of the left empirical p-quantile: `ceil(n p)`.
fn left_quantile_rank(n: usize, p: f64) -> usize {
    ((n as f64 * p).ceil() as usize).clamp(1, n)
}

/// Empirical VaR: the `ceil(n p)`-th order statistic, no interpolation.
pub fn var_of_samples(samples: &[f64], p: RiskLevel) -> Result<f64> {
    let ys = sorted_copy(samples)?;
    Ok(ys[left_quantile_rank(ys.len(), p.value()) - 1])
}

/// Same estimator on samples already sorted ascending.
pub fn var_of_sorted(sorted: &[f64], p: RiskLevel) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::domain("risk measure of an empty sample".to_string()));
    }
    Ok(sorted[left_quantile_rank(sorted.len(), p.value()) - 1])
}

/// Empirical ES of the empirical law:
/// `(1/(1-p)) [ (k/n - p) Y_(k) + (1/n) sum_{i>k} Y_(i) ]` with `k = ceil(np)`.
pub fn es_of_samples(samples: &[f64], p: RiskLevel) -> Result<f64> {
    let ys = sorted_copy(samples)?;
    es_of_sorted(&ys, p)
}

pub fn es_of_sorted(sorted: &[f64], p: RiskLevel) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::domain("risk measure of an empty sample".to_string()));
    }
    let n = sorted.len();
    let p = p.value();
    let k = left_quantile_rank(n, p);
    let mut acc = (k as f64 / n as f64 - p) * sorted[k - 1];
    for y in &sorted[k..] {
        acc += y / n as f64;
    }
    Ok(acc / (1.0 - p))
}

pub fn ess_sup_of_samples(samples: &[f64]) -> Result<f64> {
    let ys = sorted_copy(samples)?;
    Ok(*ys.last().expect("non-empty"))
}

/// ES by adaptive quadrature of a quantile function on `(p, 1)`, with
/// divergence detection by dyadic refinement toward 1.
///
/// The tail is split into blocks `[1 - (1-p) 2^-k, 1 - (1-p) 2^-(k-1)]`. For
/// a power tail the block integrals form an exact geometric sequence, so the
/// remainder past the last computed block is summed geometrically; blocks
/// that stop shrinking signal a non-integrable tail and the result is `+inf`.
pub fn es_of_quantile_fn<F: Fn(f64) -> f64>(quantile: F, p: RiskLevel) -> Result<f64> {
    let p = p.value();
    let mut acc = 0.0;
    let mut lo = p;
    let mut prev_block: Option<f64> = None;
    let mut ratio = 0.0;
    // Stop once the remaining tail mass drops under ~1e-16 so the quantile
    // function is never evaluated at u = 1.
    let max_k = ((1.0 - p).log2() + 53.0).floor() as i32;
    for k in 1..=max_k {
        let hi = 1.0 - (1.0 - p) * 0.5_f64.powi(k);
        let block = integrate(&|u| quantile(u), lo, hi, 1e-12)?;
        acc += block;
        if let Some(prev) = prev_block {
            if prev.abs() > 0.0 {
                ratio = block / prev;
            }
            if k > 8 && block.abs() > 1e-9 && ratio >= 1.0 - 1e-9 {
                return Ok(f64::INFINITY);
            }
        }
        if k > 4 && block.abs() < 1e-12 {
            return Ok(acc / (1.0 - p));
        }
        prev_block = Some(block);
        lo = hi;
    }
    // Geometric extrapolation of the untouched tail.
    let last = prev_block.unwrap_or(0.0);
    if ratio >= 1.0 - 1e-9 && last.abs() > 1e-9 {
        return Ok(f64::INFINITY);
    }
    if ratio > 0.0 && ratio < 1.0 {
        acc += last * ratio / (1.0 - ratio);
    }
    Ok(acc / (1.0 - p))
}

/// Lower bound on `ES_p(X)` from the dual representation: for any density
/// slope `B` with `E[B(X)] = 1` and `0 <= B <= 1/(1-p)`, `E[B(X) X] <= ES_p(X)`,
/// with equality at `B = 1{X > VaR_p(X)}/(1-p)` for continuous laws.
///
/// The candidate is validated against both constraints (tolerance 1e-8) and
/// the attained value `E[B(X) X]` is returned.
pub fn es_dual_check<F: Fn(f64) -> f64>(
    model: &MarketModel,
    p: RiskLevel,
    candidate: F,
) -> Result<f64> {
    let cap = 1.0 / (1.0 - p.value());
    let x = model.x();
    let grid = 4096;
    for i in 0..grid {
        let u = (i as f64 + 0.5) / grid as f64;
        let b = candidate(x.quantile(u)?);
        if b < -1e-8 {
            return Err(Error::domain(format!(
                "dual candidate violates B >= 0: value {b:.6e} at quantile {u:.4}"
            )));
        }
        if b > cap + 1e-8 {
            return Err(Error::domain(format!(
                "dual candidate violates B <= 1/(1-p) = {cap:.6}: value {b:.6e} at quantile {u:.4}"
            )));
        }
    }
    let mean = integrate(&|u: f64| candidate(x.quantile(u).expect("u in (0,1)")), 1e-12, 1.0 - 1e-12, 1e-10)?;
    if (mean - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!(
            "dual candidate violates E[B(X)] = 1: mean {mean:.10}"
        )));
    }
    integrate(
        &|u: f64| {
            let q = x.quantile(u).expect("u in (0,1)");
            candidate(q) * q
        },
        1e-12,
        1.0 - 1e-12,
        1e-10,
    )
}
