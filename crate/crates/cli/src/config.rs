//! Experiment configuration: a versioned TOML schema that pins the model,
//! the problem, the perturbation family, and the probe settings.
//!
//! ```toml
//! schema_version = 1
//! rho = "var"                  # var | es
//! metric = "linf"              # linf | lq | prokhorov
//! metric_q = 2.0               # exponent for the lq metric
//! n_samples = 1000000
//! seed = 42                    # required: runs must be reproducible
//!
//! [model.x]
//! family = "uniform"           # uniform | exponential | lognormal | pareto | empirical
//! params = { a = 0.0, b = 1.0 }
//!
//! [model.gamma]
//! kind = "constant"            # constant | linear
//! params = {}                  # intercept / slope for linear
//!
//! [problem]
//! constraint = "ns"            # cm | ns | bd
//! p = 0.9
//! x0 = 0.2
//! m = 1.0                      # bd only
//! epsilon = 0.1                # worst-case ball radius (bd + var only)
//!
//! [perturb]
//! kind = "shift"               # shift | scale | nudge | tail_spike
//! params = {}
//! eps_grid = [0.1, 0.01, 0.001]
//! ```

use crate::AppError;
use riskopt_core::dro::DroSpec;
use riskopt_core::perturb::PerturbationFamily;
use riskopt_core::{
    MarketModel, MetricKind, PricingSpec, ProblemSpec, RiskLevel, RiskMeasure, ScalarDistribution,
};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub rho: String,
    pub metric: String,
    #[serde(default)]
    pub metric_q: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub model: ModelBlock,
    pub problem: ProblemBlock,
    pub perturb: PerturbBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub x: XBlock,
    pub gamma: GammaBlock,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct XBlock {
    pub family: String,
    #[serde(default)]
    pub params: XParams,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct XParams {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rate: Option<f64>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub scale: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GammaBlock {
    pub kind: String,
    #[serde(default)]
    pub params: GammaParams,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GammaParams {
    pub intercept: Option<f64>,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub constraint: String,
    pub p: f64,
    pub x0: f64,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Levels for the unbounded-quantile witness (complete market).
    #[serde(default)]
    pub witness_levels: Option<Vec<f64>>,
    /// Weights for the unbounded-tail-average witness (complete market).
    #[serde(default)]
    pub witness_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PerturbBlock {
    pub kind: String,
    #[serde(default)]
    pub params: PerturbParams,
    pub eps_grid: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PerturbParams {
    /// Nudge: protected level (defaults to the p-quantile of X).
    pub a: Option<f64>,
    pub quantile_coupled: Option<bool>,
    pub mass_scale: Option<f64>,
    pub height_scale: Option<f64>,
    pub height_power: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub solution: String,
    pub gap_curve: String,
    pub report: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            solution: "solution.json".to_string(),
            gap_curve: "gap_curve.csv".to_string(),
            report: "report.json".to_string(),
        }
    }
}

fn bad(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| bad(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.rho_measure()?;
        self.metric_kind()?;
        if self.n_samples == 0 {
            return Err(bad("n_samples must be positive"));
        }
        if !(self.problem.p > 0.0 && self.problem.p < 1.0) {
            return Err(bad(format!("p must lie in (0,1), got {}", self.problem.p)));
        }
        match self.problem.constraint.as_str() {
            "cm" | "ns" | "bd" => {}
            other => return Err(bad(format!("unknown constraint {other:?} (cm | ns | bd)"))),
        }
        if self.problem.epsilon.is_some() {
            if self.problem.constraint != "bd" {
                return Err(bad("epsilon (worst-case radius) requires constraint = \"bd\""));
            }
            if self.rho != "var" {
                return Err(bad("epsilon (worst-case radius) requires rho = \"var\""));
            }
        }
        if self.perturb.eps_grid.is_empty() {
            return Err(bad("perturb.eps_grid must not be empty"));
        }
        if self.perturb.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(bad("perturb.eps_grid entries must be positive"));
        }
        if self.perturb.eps_grid.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(bad("perturb.eps_grid must be strictly decreasing"));
        }
        match self.perturb.kind.as_str() {
            "shift" | "scale" | "nudge" | "tail_spike" => {}
            other => return Err(bad(format!(
                "unknown perturb.kind {other:?} (shift | scale | nudge | tail_spike)"
            ))),
        }
        Ok(())
    }

    pub fn rho_measure(&self) -> Result<RiskMeasure, AppError> {
        match self.rho.as_str() {
            "var" => Ok(RiskMeasure::Var),
            "es" => Ok(RiskMeasure::Es),
            other => Err(bad(format!("unknown rho {other:?} (var | es)"))),
        }
    }

    pub fn metric_kind(&self) -> Result<MetricKind, AppError> {
        match self.metric.as_str() {
            "linf" => Ok(MetricKind::LInf),
            "lq" => {
                let q = self.metric_q.unwrap_or(2.0);
                MetricKind::lq(q).map_err(|e| bad(e.to_string()))
            }
            "prokhorov" => Ok(MetricKind::ProkhorovWeak),
            other => Err(bad(format!("unknown metric {other:?} (linf | lq | prokhorov)"))),
        }
    }

    pub fn risk_level(&self) -> Result<RiskLevel, AppError> {
        RiskLevel::new(self.problem.p).map_err(AppError::Core)
    }

    pub fn build_model(&self) -> Result<MarketModel, AppError> {
        let x = self.build_x()?;
        let gamma = self.build_gamma()?;
        MarketModel::new(x, gamma).map_err(AppError::Core)
    }

    fn build_x(&self) -> Result<ScalarDistribution, AppError> {
        let p = &self.model.x.params;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| bad(format!("x.params.{name} required for family {}", self.model.x.family)))
        };
        match self.model.x.family.as_str() {
            "uniform" => ScalarDistribution::uniform(need(p.a, "a")?, need(p.b, "b")?)
                .map_err(AppError::Core),
            "exponential" => {
                ScalarDistribution::exponential(need(p.rate, "rate")?).map_err(AppError::Core)
            }
            "lognormal" => {
                ScalarDistribution::lognormal(need(p.mu, "mu")?, need(p.sigma, "sigma")?)
                    .map_err(AppError::Core)
            }
            "pareto" => ScalarDistribution::pareto(need(p.alpha, "alpha")?, need(p.scale, "scale")?)
                .map_err(AppError::Core),
            "empirical" => {
                let values = p.values.clone().ok_or_else(|| bad("x.params.values required"))?;
                let weights = p.weights.clone().ok_or_else(|| bad("x.params.weights required"))?;
                ScalarDistribution::empirical(values, weights).map_err(AppError::Core)
            }
            other => Err(bad(format!(
                "unknown x.family {other:?} (uniform | exponential | lognormal | pareto | empirical)"
            ))),
        }
    }

    fn build_gamma(&self) -> Result<PricingSpec, AppError> {
        match self.model.gamma.kind.as_str() {
            "constant" => Ok(PricingSpec::Constant),
            "linear" => Ok(PricingSpec::Linear {
                intercept: self.model.gamma.params.intercept.unwrap_or(0.0),
                slope: self.model.gamma.params.slope.unwrap_or(1.0),
            }),
            other => Err(bad(format!("unknown gamma.kind {other:?} (constant | linear)"))),
        }
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, AppError> {
        let p = self.risk_level()?;
        match self.problem.constraint.as_str() {
            "cm" => ProblemSpec::complete_market(p, self.problem.x0).map_err(AppError::Core),
            "ns" => ProblemSpec::no_short_selling(p, self.problem.x0).map_err(AppError::Core),
            "bd" => {
                let m = self
                    .problem
                    .m
                    .ok_or_else(|| bad("problem.m required for constraint = \"bd\""))?;
                ProblemSpec::bounded(p, self.problem.x0, m).map_err(AppError::Core)
            }
            _ => unreachable!("validated"),
        }
    }

    pub fn build_dro(&self) -> Result<Option<DroSpec>, AppError> {
        match self.problem.epsilon {
            None => Ok(None),
            Some(eps) => {
                let base = self.build_problem()?;
                DroSpec::new(base, eps).map(Some).map_err(AppError::Core)
            }
        }
    }

    pub fn build_family(&self, model: &MarketModel) -> Result<PerturbationFamily, AppError> {
        let prm = &self.perturb.params;
        match self.perturb.kind.as_str() {
            "shift" => Ok(PerturbationFamily::Shift),
            "scale" => Ok(PerturbationFamily::Scale),
            "nudge" => {
                let a = match prm.a {
                    Some(a) => a,
                    None => model.x().quantile(self.problem.p).map_err(AppError::Core)?,
                };
                Ok(PerturbationFamily::UniformNudge {
                    phi: Arc::new(|x| x),
                    a,
                    quantile_coupled: prm.quantile_coupled.unwrap_or(false),
                })
            }
            "tail_spike" => Ok(PerturbationFamily::TailSpike {
                mass_scale: prm.mass_scale.unwrap_or(1.0),
                height_scale: prm.height_scale.unwrap_or(1.0),
                height_power: prm.height_power.unwrap_or(2.0),
            }),
            _ => unreachable!("validated"),
        }
    }

    /// Instance identity used by `compare` to reject mismatched pairs.
    pub fn shares_instance_with(&self, other: &Self) -> bool {
        self.model == other.model
            && self.problem == other.problem
            && self.perturb == other.perturb
            && self.metric == other.metric
            && self.metric_q == other.metric_q
            && self.seed == other.seed
            && self.n_samples == other.n_samples
    }
}
