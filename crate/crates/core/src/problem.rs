//! Problem specifications shared by the optimizers.

use crate::error::{Error, Result};
use crate::risk::RiskLevel;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Budget constraint only: `E[gamma g(X)] >= x0`.
    CompleteMarket,
    /// Budget plus no short-selling or over-hedging: `0 <= g(X) <= X`.
    NoShortSelling,
    /// Budget plus a hard cap: `0 <= g(X) <= m`.
    Bounded,
}

/// Confidence level, budget, and constraint set for one optimization run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProblemSpec {
    pub p: RiskLevel,
    pub x0: f64,
    /// Cap level; present only for the bounded constraint.
    pub m: Option<f64>,
    pub constraint: ConstraintKind,
}

impl ProblemSpec {
    pub fn complete_market(p: RiskLevel, x0: f64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::domain(format!("budget must be finite, got {x0}")));
        }
        Ok(ProblemSpec { p, x0, m: None, constraint: ConstraintKind::CompleteMarket })
    }

    /// Requires `x0 >= 0`; the upper feasibility bound `x0 < E[gamma X]`
    /// depends on the model and is enforced by the solver.
    pub fn no_short_selling(p: RiskLevel, x0: f64) -> Result<Self> {
        if !(x0.is_finite() && x0 >= 0.0) {
            return Err(Error::domain(format!(
                "no-short-selling problem requires 0 <= x0, got {x0}"
            )));
        }
        Ok(ProblemSpec { p, x0, m: None, constraint: ConstraintKind::NoShortSelling })
    }

    pub fn bounded(p: RiskLevel, x0: f64, m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::domain(format!("bound must be positive, got {m}")));
        }
        if !(x0.is_finite() && x0 >= 0.0 && x0 < m) {
            return Err(Error::domain(format!(
                "bounded problem requires 0 <= x0 < m, got x0={x0}, m={m}"
            )));
        }
        Ok(ProblemSpec { p, x0, m: Some(m), constraint: ConstraintKind::Bounded })
    }

    pub fn bound(&self) -> Result<f64> {
        self.m
            .ok_or_else(|| Error::domain("problem carries no cap level".to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_spec_validates_budget_against_cap() {
        let p = RiskLevel::new(0.9).unwrap();
        assert!(ProblemSpec::bounded(p, 0.5, 1.0).is_ok());
        assert!(ProblemSpec::bounded(p, 1.0, 1.0).is_err());
        assert!(ProblemSpec::bounded(p, -0.1, 1.0).is_err());
    }

    #[test]
    fn no_short_selling_requires_nonnegative_budget() {
        let p = RiskLevel::new(0.9).unwrap();
        assert!(ProblemSpec::no_short_selling(p, -0.2).is_err());
    }
}
