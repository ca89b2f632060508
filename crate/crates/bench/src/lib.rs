//! Shared fixtures for the benchmark targets.

use riskopt_core::{MarketModel, PricingSpec, ProblemSpec, RiskLevel, ScalarDistribution};

pub fn uniform_model() -> MarketModel {
    MarketModel::new(ScalarDistribution::uniform(0.0, 1.0).unwrap(), PricingSpec::Constant)
        .unwrap()
}

pub fn exp_linear_model() -> MarketModel {
    MarketModel::new(
        ScalarDistribution::exponential(1.0).unwrap(),
        PricingSpec::Linear { intercept: 0.0, slope: 1.0 },
    )
    .unwrap()
}

pub fn level() -> RiskLevel {
    RiskLevel::new(0.9).unwrap()
}

pub fn ns_spec(x0: f64) -> ProblemSpec {
    ProblemSpec::no_short_selling(level(), x0).unwrap()
}

pub fn bd_spec(x0: f64, m: f64) -> ProblemSpec {
    ProblemSpec::bounded(level(), x0, m).unwrap()
}
