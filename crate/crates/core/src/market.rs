//! The market model: a nonnegative economic scalar `X` with a pricing density
//! `gamma(X)` normalized so that `E[gamma(X)] = 1`. A position `g(X)` is
//! priced as `E[gamma(X) g(X)]`.

use crate::dist::ScalarDistribution;
use crate::error::{Error, Result};
use crate::numerics::{integrate, Interval};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub const FULL_LINE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Constant,
    Increasing,
    Decreasing,
    General,
}

/// An unnormalized pricing-density specification; the model constructor
/// rescales it so `E[gamma(X)] = 1`.
#[derive(Clone)]
pub enum PricingSpec {
    /// `gamma(x) = 1`.
    Constant,
    /// `gamma(x) = intercept + slope * x`.
    Linear { intercept: f64, slope: f64 },
    /// Arbitrary positive function, evaluated pointwise. Regions such as
    /// `{gamma > c}` are then found numerically instead of in closed form.
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        monotonicity: Monotonicity,
        label: String,
    },
}

impl fmt::Debug for PricingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PricingSpec::Constant => write!(f, "Constant"),
            PricingSpec::Linear { intercept, slope } => {
                write!(f, "Linear {{ intercept: {intercept}, slope: {slope} }}")
            }
            PricingSpec::Custom { label, monotonicity, .. } => {
                write!(f, "Custom {{ label: {label:?}, monotonicity: {monotonicity:?} }}")
            }
        }
    }
}

/// A pricing density bound to a model, carrying the normalization factor.
#[derive(Debug, Clone)]
pub struct PricingDensity {
    spec: PricingSpec,
    scale: f64,
}

impl PricingDensity {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.scale
            * match &self.spec {
                PricingSpec::Constant => 1.0,
                PricingSpec::Linear { intercept, slope } => intercept + slope * x,
                PricingSpec::Custom { f, .. } => f(x),
            }
    }

    pub fn monotonicity(&self) -> Monotonicity {
        match &self.spec {
            PricingSpec::Constant => Monotonicity::Constant,
            PricingSpec::Linear { slope, .. } => {
                if *slope > 0.0 {
                    Monotonicity::Increasing
                } else if *slope < 0.0 {
                    Monotonicity::Decreasing
                } else {
                    Monotonicity::Constant
                }
            }
            PricingSpec::Custom { monotonicity, .. } => *monotonicity,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.monotonicity() == Monotonicity::Constant
    }

    pub fn spec(&self) -> &PricingSpec {
        &self.spec
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Serializable description for reports.
    pub fn describe(&self) -> PricingDescription {
        match &self.spec {
            PricingSpec::Constant => PricingDescription {
                kind: "constant".to_string(),
                intercept: None,
                slope: None,
                label: None,
                normalization: self.scale,
            },
            PricingSpec::Linear { intercept, slope } => PricingDescription {
                kind: "linear".to_string(),
                intercept: Some(*intercept),
                slope: Some(*slope),
                label: None,
                normalization: self.scale,
            },
            PricingSpec::Custom { label, .. } => PricingDescription {
                kind: "custom".to_string(),
                intercept: None,
                slope: None,
                label: Some(label.clone()),
                normalization: self.scale,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PricingDescription {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub normalization: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Holds,
    Fails,
    Deferred,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckOutcome {
    fn holds(detail: impl Into<String>) -> Self {
        CheckOutcome { status: CheckStatus::Holds, detail: detail.into() }
    }
    fn fails(detail: impl Into<String>) -> Self {
        CheckOutcome { status: CheckStatus::Fails, detail: detail.into() }
    }
    fn deferred(detail: impl Into<String>) -> Self {
        CheckOutcome { status: CheckStatus::Deferred, detail: detail.into() }
    }
    fn unknown(detail: impl Into<String>) -> Self {
        CheckOutcome { status: CheckStatus::Unknown, detail: detail.into() }
    }

    pub fn holds_now(&self) -> bool {
        self.status == CheckStatus::Holds
    }
}

/// Per-assumption diagnostics. The two quantile-flatness checks depend on the
/// solved thresholds, so they start `Deferred` and are re-checked by the
/// solvers.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// X >= 0 with a positive density; gamma > 0, E[gamma] = 1, E[gamma X] finite.
    pub model_regularity: CheckOutcome,
    /// ess-sup gamma <= 1/(1-p).
    pub gamma_essential_bound: CheckOutcome,
    /// gamma constant, or continuous with continuously distributed gamma(X).
    pub gamma_continuity: CheckOutcome,
    /// P((X-q) gamma <= VaR_p((X-q) gamma)) = p at the solved q.
    pub quantile_continuity_ns: CheckOutcome,
    /// P(gamma <= VaR_p(gamma)) = p.
    pub quantile_continuity_bd: CheckOutcome,
    /// p >= 1/2, nonincreasing density of X, strictly increasing gamma.
    pub worst_case_shape: CheckOutcome,
}

/// The economic model: distribution of `X` plus pricing density `gamma`.
/// Immutable after construction; all evaluations are pure functions.
#[derive(Debug, Clone)]
pub struct MarketModel {
    x: ScalarDistribution,
    gamma: PricingDensity,
    rescale_warning: Option<String>,
}

/// Construction rescales the supplied density so `E[gamma(X)] = 1`; when the
/// raw expectation misses 1 by more than this tolerance a warning is recorded
/// on the model instead of rejecting it.
pub const NORMALIZATION_WARN_TOL: f64 = 1e-8;

impl MarketModel {
    pub fn new(x: ScalarDistribution, spec: PricingSpec) -> Result<Self> {
        let (lo, _) = x.support();
        if lo < 0.0 {
            return Err(Error::domain(format!(
                "economic scalar must be nonnegative; support starts at {lo}"
            )));
        }

        // Positivity of the raw density on the open support.
        let raw = |t: f64| -> Result<f64> {
            let q = x.quantile(t)?;
            Ok(match &spec {
                PricingSpec::Constant => 1.0,
                PricingSpec::Linear { intercept, slope } => intercept + slope * q,
                PricingSpec::Custom { f, .. } => f(q),
            })
        };
        for i in 1..128 {
            let t = i as f64 / 128.0;
            let v = raw(t)?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "pricing density must be positive on the support; value {v} at quantile {t}"
                )));
            }
        }

        let unnormalized = MarketModel {
            x: x.clone(),
            gamma: PricingDensity { spec: spec.clone(), scale: 1.0 },
            rescale_warning: None,
        };
        let raw_mean = unnormalized.expect_gamma_on(FULL_LINE)?;
        if !raw_mean.is_finite() || raw_mean <= 0.0 {
            return Err(Error::domain(format!(
                "E[gamma(X)] = {raw_mean} is not a positive finite number"
            )));
        }
        let rescale_warning = if (raw_mean - 1.0).abs() > NORMALIZATION_WARN_TOL {
            Some(format!(
                "pricing density rescaled by {:.17e} so that E[gamma(X)] = 1 (raw mean {raw_mean:.17e})",
                1.0 / raw_mean
            ))
        } else {
            None
        };

        let model = MarketModel {
            x,
            gamma: PricingDensity { spec, scale: 1.0 / raw_mean },
            rescale_warning,
        };
        let priced_mean = model.expect_gamma_x_on(FULL_LINE)?;
        if !priced_mean.is_finite() {
            return Err(Error::domain(
                "E[gamma(X) X] is not finite for this model".to_string(),
            ));
        }
        Ok(model)
    }

    pub fn x(&self) -> &ScalarDistribution {
        &self.x
    }

    pub fn gamma(&self) -> &PricingDensity {
        &self.gamma
    }

    pub fn gamma_at(&self, x: f64) -> f64 {
        self.gamma.evaluate(x)
    }

    pub fn rescale_warning(&self) -> Option<&str> {
        self.rescale_warning.as_deref()
    }

    /// `E[gamma(X) 1{X in A}]` for a finite union of intervals, by closed
    /// form for the constant/linear densities and adaptive quadrature
    /// (absolute tolerance 1e-10) otherwise.
    pub fn expect_gamma_indicator(&self, intervals: &[Interval]) -> Result<f64> {
        let mut acc = 0.0;
        for iv in intervals {
            acc += self.expect_gamma_on(*iv)?;
        }
        Ok(acc)
    }

    /// `E[gamma(X) X 1{X in A}]`.
    pub fn expect_gamma_x_indicator(&self, intervals: &[Interval]) -> Result<f64> {
        let mut acc = 0.0;
        for iv in intervals {
            acc += self.expect_gamma_x_on(*iv)?;
        }
        Ok(acc)
    }

    pub fn expect_gamma_on(&self, iv: Interval) -> Result<f64> {
        if iv.is_empty() {
            return Ok(0.0);
        }
        let s = self.gamma.scale;
        match &self.gamma.spec {
            PricingSpec::Constant => Ok(s * self.x.prob(iv)),
            PricingSpec::Linear { intercept, slope } => {
                Ok(s * (intercept * self.x.prob(iv) + slope * self.x.partial_mean(iv)))
            }
            PricingSpec::Custom { f, .. } => {
                let g = |x: f64| f(x);
                self.quadrature_expectation(iv, g)
            }
        }
    }

    pub fn expect_gamma_x_on(&self, iv: Interval) -> Result<f64> {
        if iv.is_empty() {
            return Ok(0.0);
        }
        let s = self.gamma.scale;
        match &self.gamma.spec {
            PricingSpec::Constant => Ok(s * self.x.partial_mean(iv)),
            PricingSpec::Linear { intercept, slope } => {
                Ok(s * (intercept * self.x.partial_mean(iv) + slope * self.x.partial_sq(iv)))
            }
            PricingSpec::Custom { f, .. } => {
                let g = |x: f64| f(x) * x;
                self.quadrature_expectation(iv, g)
            }
        }
    }

    /// Price of the full exposure, `E[gamma(X) X]`.
    pub fn expect_gamma_x(&self) -> Result<f64> {
        self.expect_gamma_x_on(FULL_LINE)
    }

    /// Quantile-space quadrature of `E[h(X) 1{X in iv}] = int h(Q(u)) du`.
    fn quadrature_expectation<F: Fn(f64) -> f64>(&self, iv: Interval, h: F) -> Result<f64> {
        let u_lo = self.x.cdf(iv.lo.max(self.x.support().0));
        let u_hi = if iv.hi.is_finite() { self.x.cdf(iv.hi) } else { 1.0 };
        if u_hi <= u_lo {
            return Ok(0.0);
        }
        // Clip away the quantile endpoints where Q(u) may blow up; the
        // clipped mass is 1e-13 per side, below the 1e-10 tolerance for the
        // integrable densities this path accepts.
        let a = u_lo.max(1e-13);
        let b = u_hi.min(1.0 - 1e-13);
        if b <= a {
            return Ok(0.0);
        }
        let integrand = |u: f64| {
            let x = self.x.quantile(u).expect("u in (0,1)");
            h(x)
        };
        Ok(self.gamma.scale * integrate(&integrand, a, b, 1e-10)?)
    }

    /// Essential supremum of `gamma(X)` (may be `+inf`). For `Custom`
    /// densities this is a grid estimate.
    pub fn ess_sup_gamma(&self) -> f64 {
        let (lo, hi) = self.x.support();
        match (&self.gamma.spec, self.gamma.monotonicity()) {
            (PricingSpec::Constant, _) => self.gamma.scale,
            (PricingSpec::Linear { .. }, Monotonicity::Increasing) => {
                if hi.is_finite() {
                    self.gamma.evaluate(hi)
                } else {
                    f64::INFINITY
                }
            }
            (PricingSpec::Linear { .. }, Monotonicity::Decreasing) => self.gamma.evaluate(lo),
            _ => {
                let mut sup = f64::NEG_INFINITY;
                for i in 0..=2048 {
                    let t = (i as f64 + 0.5) / 2049.0;
                    let x = self.x.quantile(t).expect("t in (0,1)");
                    sup = sup.max(self.gamma.evaluate(x));
                }
                sup
            }
        }
    }

    /// Infimum of `gamma(X)` over the support (same caveats as `ess_sup_gamma`).
    pub fn ess_inf_gamma(&self) -> f64 {
        let (lo, hi) = self.x.support();
        match (&self.gamma.spec, self.gamma.monotonicity()) {
            (PricingSpec::Constant, _) => self.gamma.scale,
            (PricingSpec::Linear { .. }, Monotonicity::Increasing) => self.gamma.evaluate(lo),
            (PricingSpec::Linear { .. }, Monotonicity::Decreasing) => {
                if hi.is_finite() {
                    self.gamma.evaluate(hi)
                } else {
                    // Positivity was checked on the grid; the limit may be 0.
                    0.0
                }
            }
            _ => {
                let mut inf = f64::INFINITY;
                for i in 0..=2048 {
                    let t = (i as f64 + 0.5) / 2049.0;
                    let x = self.x.quantile(t).expect("t in (0,1)");
                    inf = inf.min(self.gamma.evaluate(x));
                }
                inf
            }
        }
    }

    /// `ES_p(gamma(X))`: closed form for monotone densities, u-grid estimate
    /// otherwise.
    pub fn es_of_gamma(&self, p: f64) -> Result<f64> {
        match self.gamma.monotonicity() {
            Monotonicity::Constant => Ok(self.gamma.scale),
            Monotonicity::Increasing => {
                let t = self.x.quantile(p)?;
                Ok(self.expect_gamma_on(Interval::new(t, f64::INFINITY))? / (1.0 - p))
            }
            Monotonicity::Decreasing => {
                let t = self.x.quantile(1.0 - p)?;
                Ok(self.expect_gamma_on(Interval::new(f64::NEG_INFINITY, t))? / (1.0 - p))
            }
            Monotonicity::General => self.es_by_u_grid(p, |x, g| {
                let _ = x;
                g
            }),
        }
    }

    /// `ES_p(gamma(X) X)`: closed form when `gamma(x) x` is monotone in `x`
    /// (constant or increasing gamma on a nonnegative support).
    pub fn es_of_gamma_x(&self, p: f64) -> Result<f64> {
        match self.gamma.monotonicity() {
            Monotonicity::Constant => Ok(self.gamma.scale * self.x.es(p)?),
            Monotonicity::Increasing => {
                let t = self.x.quantile(p)?;
                Ok(self.expect_gamma_x_on(Interval::new(t, f64::INFINITY))? / (1.0 - p))
            }
            _ => self.es_by_u_grid(p, |x, g| g * x),
        }
    }

    /// Empirical ES over a deterministic quantile grid; estimator fallback
    /// for non-monotone transforms of X.
    fn es_by_u_grid<F: Fn(f64, f64) -> f64>(&self, p: f64, value: F) -> Result<f64> {
        let n = 200_000;
        let mut vals: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                let x = self.x.quantile(u).expect("u in (0,1)");
                value(x, self.gamma.evaluate(x))
            })
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        crate::risk::es_of_samples(&vals, crate::risk::RiskLevel::new(p)?)
    }

    /// Per-assumption diagnostics at confidence level `p`.
    pub fn check_assumptions(&self, p: f64) -> Result<AssumptionReport> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("confidence level must lie in (0,1), got {p}")));
        }
        let model_regularity = if !self.x.has_positive_density() {
            CheckOutcome::fails("X is atomic; a positive density on an interval support is required")
        } else {
            let gx = self.expect_gamma_x()?;
            CheckOutcome::holds(format!(
                "X >= 0 with positive density; E[gamma(X)] = 1 after scaling by {:.6e}; E[gamma X] = {gx:.6e}",
                self.gamma.scale
            ))
        };

        let bound = 1.0 / (1.0 - p);
        let ess_sup = self.ess_sup_gamma();
        let gamma_essential_bound = if ess_sup <= bound + 1e-12 {
            CheckOutcome::holds(format!("ess-sup gamma = {ess_sup:.6} <= {bound:.6}"))
        } else {
            CheckOutcome::fails(format!("ess-sup gamma = {ess_sup:.6} > {bound:.6}"))
        };

        let gamma_continuity = match self.gamma.monotonicity() {
            Monotonicity::Constant => CheckOutcome::holds("gamma is constant"),
            Monotonicity::Increasing | Monotonicity::Decreasing => CheckOutcome::holds(
                "gamma is continuous and strictly monotone, so gamma(X) is continuously distributed",
            ),
            Monotonicity::General => CheckOutcome::unknown(
                "custom density: continuity of the law of gamma(X) is not verified",
            ),
        };

        let quantile_continuity_ns =
            CheckOutcome::deferred("depends on the solved threshold; re-checked by the solver");
        let quantile_continuity_bd = if self.gamma.is_constant() {
            CheckOutcome::fails("gamma constant: P(gamma <= VaR_p(gamma)) = 1 != p")
        } else if matches!(self.gamma.monotonicity(), Monotonicity::General) {
            CheckOutcome::unknown("custom density: flatness of the gamma quantile not verified")
        } else {
            CheckOutcome::holds("gamma(X) continuously distributed: P(gamma <= VaR_p(gamma)) = p")
        };

        let mut shape_failures = Vec::new();
        if p < 0.5 {
            shape_failures.push(format!("requires p >= 1/2, got {p}"));
        }
        if !self.x.has_nonincreasing_density() {
            shape_failures.push("X does not have a nonincreasing density on its support".to_string());
        }
        if self.gamma.monotonicity() != Monotonicity::Increasing {
            shape_failures.push("gamma is not a strictly increasing function of X".to_string());
        }
        let worst_case_shape = if shape_failures.is_empty() {
            CheckOutcome::holds(
                "p >= 1/2, nonincreasing density, increasing gamma; positivity of the solved level is checked at solve time",
            )
        } else {
            CheckOutcome::fails(shape_failures.join("; "))
        };

        Ok(AssumptionReport {
            model_regularity,
            gamma_essential_bound,
            gamma_continuity,
            quantile_continuity_ns,
            quantile_continuity_bd,
            worst_case_shape,
        })
    }
}
