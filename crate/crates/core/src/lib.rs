//! Closed and semi-analytic solutions of quantile-based portfolio
//! optimization problems (VaR and ES objectives under complete-market,
//! no-short-selling, bounded, and worst-case-ball constraints), together
//! with machinery to probe how the optimized positions behave when the
//! model is perturbed.

// `!(x > 0.0)` style guards intentionally reject NaN along with the
// out-of-range values; the positive comparison would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod dro;
pub mod error;
pub mod es_opt;
pub mod market;
pub mod metrics;
pub mod numerics;
pub mod perturb;
pub mod probe;
pub mod problem;
pub mod risk;
pub mod sampling;
pub mod solution;
pub mod var_opt;
pub mod witness;

pub use dist::ScalarDistribution;
pub use error::{Error, Result};
pub use market::{AssumptionReport, CheckStatus, MarketModel, Monotonicity, PricingSpec};
pub use metrics::MetricKind;
pub use problem::{ConstraintKind, ProblemSpec};
pub use risk::{RiskLevel, RiskMeasure};
pub use solution::{Piece, Segment, SolutionFunction, SolutionMeta};
