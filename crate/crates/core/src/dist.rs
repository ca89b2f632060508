//! One-dimensional distributions for the economic scalar: four parametric
//! families with closed-form quantiles, truncated moments, and tail
//! expectations, plus finite discrete (atomic) distributions.

use crate::error::{Error, Result};
use crate::numerics::Interval;
use crate::sampling::open_unit;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::OnceLock;

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).expect("standard normal"))
}

pub fn norm_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

pub fn norm_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// A scalar distribution. Parametric families have positive densities on
/// interval supports; `EmpiricalAtoms` is a finite discrete law used for
/// samples, metrics, and discretizations.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarDistribution {
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Pareto { alpha: f64, scale: f64 },
    EmpiricalAtoms { values: Vec<f64>, weights: Vec<f64> },
}

use ScalarDistribution::*;

impl ScalarDistribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::domain(format!("uniform requires a < b, got [{a}, {b}]")));
        }
        Ok(Uniform { a, b })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::domain(format!("exponential requires rate > 0, got {rate}")));
        }
        Ok(Exponential { rate })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!(
                "lognormal requires finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Lognormal { mu, sigma })
    }

    /// `alpha > 1` is required so the first moment (and the budget integral
    /// under the shipped pricing densities) stays finite.
    pub fn pareto(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::domain(format!("pareto requires alpha > 1, got {alpha}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::domain(format!("pareto requires scale > 0, got {scale}")));
        }
        Ok(Pareto { alpha, scale })
    }

    /// Atoms must be strictly sorted; weights positive and summing to 1
    /// within 1e-12.
    pub fn empirical(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::domain("empirical atoms: need equal, nonzero lengths".to_string()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("empirical atoms: values must be strictly ascending".to_string()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::domain("empirical atoms: weights must be positive".to_string()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "empirical atoms: weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(EmpiricalAtoms { values, weights })
    }

    /// Equal-weight atoms built from raw samples (sorted copy).
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("empty sample".to_string()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|x, y| x.partial_cmp(y).expect("non-NaN samples"));
        let w = 1.0 / sorted.len() as f64;
        // Merge duplicate values so the atom list stays strictly sorted.
        let mut values = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for v in sorted {
            if values.last() == Some(&v) {
                *weights.last_mut().expect("non-empty") += w;
            } else {
                values.push(v);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(EmpiricalAtoms { values, weights })
    }

    pub fn point_mass(v: f64) -> Self {
        EmpiricalAtoms { values: vec![v], weights: vec![1.0] }
    }

    /// Support as `(lower, upper)`; `upper` may be `+inf`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Uniform { a, b } => (*a, *b),
            Exponential { .. } => (0.0, f64::INFINITY),
            Lognormal { .. } => (0.0, f64::INFINITY),
            Pareto { scale, .. } => (*scale, f64::INFINITY),
            EmpiricalAtoms { values, .. } => (values[0], *values.last().expect("non-empty")),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    norm_cdf((x.ln() - mu) / sigma)
                }
            }
            Pareto { alpha, scale } => {
                if x <= *scale {
                    0.0
                } else {
                    1.0 - (scale / x).powf(*alpha)
                }
            }
            EmpiricalAtoms { values, weights } => values
                .iter()
                .zip(weights)
                .take_while(|(v, _)| **v <= x)
                .map(|(_, w)| w)
                .sum(),
        }
    }

    /// Survival function `P(X > x)`, computed without cancellation in the
    /// far tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Uniform { a, b } => ((b - x) / (b - a)).clamp(0.0, 1.0),
            Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    norm_cdf(-(x.ln() - mu) / sigma)
                }
            }
            Pareto { alpha, scale } => {
                if x <= *scale {
                    1.0
                } else {
                    (scale / x).powf(*alpha)
                }
            }
            EmpiricalAtoms { values, weights } => values
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v > x)
                .map(|(_, w)| w)
                .sum(),
        }
    }

    /// Density where one exists; `None` for atomic laws.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        match self {
            Uniform { a, b } => Some(if x >= *a && x <= *b { 1.0 / (b - a) } else { 0.0 }),
            Exponential { rate } => Some(if x >= 0.0 { rate * (-rate * x).exp() } else { 0.0 }),
            Lognormal { mu, sigma } => Some(if x > 0.0 {
                let z = (x.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
            } else {
                0.0
            }),
            Pareto { alpha, scale } => Some(if x >= *scale {
                alpha * scale.powf(*alpha) / x.powf(alpha + 1.0)
            } else {
                0.0
            }),
            EmpiricalAtoms { .. } => None,
        }
    }

    /// Left quantile `inf{x : F(x) >= t}` for `t` in (0, 1).
    pub fn quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {t}")));
        }
        Ok(match self {
            Uniform { a, b } => a + t * (b - a),
            Exponential { rate } => -(-t).ln_1p() / rate,
            Lognormal { mu, sigma } => (mu + sigma * norm_quantile(t)).exp(),
            Pareto { alpha, scale } => scale * (1.0 - t).powf(-1.0 / alpha),
            EmpiricalAtoms { values, weights } => {
                let mut acc = 0.0;
                for (v, w) in values.iter().zip(weights) {
                    acc += w;
                    if acc >= t {
                        return Ok(*v);
                    }
                }
                *values.last().expect("non-empty")
            }
        })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Uniform { a, b } => 0.5 * (a + b),
            Exponential { rate } => 1.0 / rate,
            Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Pareto { alpha, scale } => alpha * scale / (alpha - 1.0),
            EmpiricalAtoms { values, weights } => {
                values.iter().zip(weights).map(|(v, w)| v * w).sum()
            }
        }
    }

    /// `P(X in (lo, hi])`.
    pub fn prob(&self, iv: Interval) -> f64 {
        if iv.is_empty() {
            return 0.0;
        }
        if !iv.hi.is_finite() {
            return self.sf(iv.lo);
        }
        (self.cdf(iv.hi) - self.cdf(iv.lo)).max(0.0)
    }

    /// Truncated first moment `E[X 1{X in (lo, hi]}]`.
    pub fn partial_mean(&self, iv: Interval) -> f64 {
        if iv.is_empty() {
            return 0.0;
        }
        let (slo, shi) = self.support();
        let lo = iv.lo.max(slo);
        let hi = iv.hi.min(shi);
        if !(hi > lo) && !matches!(self, EmpiricalAtoms { .. }) {
            return 0.0;
        }
        match self {
            Uniform { a, b } => (hi * hi - lo * lo) / (2.0 * (b - a)),
            Exponential { rate } => {
                let g = |x: f64| {
                    if x.is_finite() {
                        (x + 1.0 / rate) * (-rate * x).exp()
                    } else {
                        0.0
                    }
                };
                g(lo) - g(hi)
            }
            Lognormal { mu, sigma } => {
                let z = |x: f64| {
                    if x <= 0.0 {
                        f64::NEG_INFINITY
                    } else if x.is_finite() {
                        (x.ln() - mu) / sigma
                    } else {
                        f64::INFINITY
                    }
                };
                (mu + 0.5 * sigma * sigma).exp() * (norm_cdf(z(hi) - sigma) - norm_cdf(z(lo) - sigma))
            }
            Pareto { alpha, scale } => {
                let t = |x: f64| {
                    if x.is_finite() {
                        x.powf(1.0 - alpha)
                    } else {
                        0.0
                    }
                };
                alpha / (alpha - 1.0) * scale.powf(*alpha) * (t(lo) - t(hi))
            }
            EmpiricalAtoms { values, weights } => values
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v > iv.lo && **v <= iv.hi)
                .map(|(v, w)| v * w)
                .sum(),
        }
    }

    /// Truncated second moment `E[X^2 1{X in (lo, hi]}]`. May be `+inf`
    /// (Pareto with `alpha <= 2` on an unbounded interval).
    pub fn partial_sq(&self, iv: Interval) -> f64 {
        if iv.is_empty() {
            return 0.0;
        }
        let (slo, shi) = self.support();
        let lo = iv.lo.max(slo);
        let hi = iv.hi.min(shi);
        if !(hi > lo) && !matches!(self, EmpiricalAtoms { .. }) {
            return 0.0;
        }
        match self {
            Uniform { a, b } => (hi.powi(3) - lo.powi(3)) / (3.0 * (b - a)),
            Exponential { rate } => {
                let g = |x: f64| {
                    if x.is_finite() {
                        (x * x + 2.0 * x / rate + 2.0 / (rate * rate)) * (-rate * x).exp()
                    } else {
                        0.0
                    }
                };
                g(lo) - g(hi)
            }
            Lognormal { mu, sigma } => {
                let z = |x: f64| {
                    if x <= 0.0 {
                        f64::NEG_INFINITY
                    } else if x.is_finite() {
                        (x.ln() - mu) / sigma
                    } else {
                        f64::INFINITY
                    }
                };
                (2.0 * mu + 2.0 * sigma * sigma).exp()
                    * (norm_cdf(z(hi) - 2.0 * sigma) - norm_cdf(z(lo) - 2.0 * sigma))
            }
            Pareto { alpha, scale } => {
                if !hi.is_finite() && *alpha <= 2.0 {
                    return f64::INFINITY;
                }
                if (*alpha - 2.0).abs() < 1e-12 {
                    alpha * scale.powf(*alpha) * (hi / lo).ln()
                } else {
                    let t = |x: f64| {
                        if x.is_finite() {
                            x.powf(2.0 - alpha)
                        } else {
                            0.0
                        }
                    };
                    alpha * scale.powf(*alpha) / (2.0 - alpha) * (t(hi) - t(lo))
                }
            }
            EmpiricalAtoms { values, weights } => values
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v > iv.lo && **v <= iv.hi)
                .map(|(v, w)| v * v * w)
                .sum(),
        }
    }

    /// Tail expectation `(1/(1-p)) * integral_p^1 quantile(u) du` in closed
    /// form per family.
    pub fn es(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("es level must lie in (0,1), got {p}")));
        }
        Ok(match self {
            Uniform { a, b } => a + (b - a) * 0.5 * (1.0 + p),
            Exponential { rate } => (self.quantile(p)?) + 1.0 / rate,
            Lognormal { mu, sigma } => {
                (mu + 0.5 * sigma * sigma).exp() * norm_cdf(sigma - norm_quantile(p)) / (1.0 - p)
            }
            Pareto { alpha, scale: _ } => self.quantile(p)? * alpha / (alpha - 1.0),
            EmpiricalAtoms { values, weights } => {
                let mut acc = 0.0;
                let mut tail = 0.0;
                for (v, w) in values.iter().zip(weights) {
                    let cum_before = acc;
                    acc += w;
                    let overlap = acc.min(1.0) - cum_before.max(p);
                    if overlap > 0.0 {
                        tail += v * overlap;
                    }
                }
                tail / (1.0 - p)
            }
        })
    }

    /// Whether the density is nonincreasing on the support (the shape the
    /// worst-case solver requires of the economic scalar).
    pub fn has_nonincreasing_density(&self) -> bool {
        matches!(self, Uniform { .. } | Exponential { .. } | Pareto { .. })
    }

    /// Positive density on an interval support (atomic laws fail this).
    pub fn has_positive_density(&self) -> bool {
        !matches!(self, EmpiricalAtoms { .. })
    }

    /// Inverse-transform sample.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u = open_unit(rng);
        self.quantile(u).expect("u in (0,1)")
    }

    pub fn sample_vec(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// The law of `X + delta` when it stays inside the shipped families.
    pub fn shifted(&self, delta: f64) -> Option<ScalarDistribution> {
        match self {
            Uniform { a, b } => Some(Uniform { a: a + delta, b: b + delta }),
            EmpiricalAtoms { values, weights } => Some(EmpiricalAtoms {
                values: values.iter().map(|v| v + delta).collect(),
                weights: weights.clone(),
            }),
            _ => None,
        }
    }

    /// The law of `k * X` for `k > 0` (closed under scaling for every family).
    pub fn scaled(&self, k: f64) -> Option<ScalarDistribution> {
        if !(k > 0.0) {
            return None;
        }
        Some(match self {
            Uniform { a, b } => Uniform { a: k * a, b: k * b },
            Exponential { rate } => Exponential { rate: rate / k },
            Lognormal { mu, sigma } => Lognormal { mu: mu + k.ln(), sigma: *sigma },
            Pareto { alpha, scale } => Pareto { alpha: *alpha, scale: k * scale },
            EmpiricalAtoms { values, weights } => EmpiricalAtoms {
                values: values.iter().map(|v| k * v).collect(),
                weights: weights.clone(),
            },
        })
    }

    /// `n` equal-weight atoms at the mid-grid quantiles, used to discretize
    /// continuous laws for the weak-metric computation.
    pub fn quantile_atoms(&self, n: usize) -> Result<ScalarDistribution> {
        if n == 0 {
            return Err(Error::domain("discretization needs n >= 1".to_string()));
        }
        let vals: Result<Vec<f64>> = (0..n)
            .map(|i| self.quantile((i as f64 + 0.5) / n as f64))
            .collect();
        ScalarDistribution::from_samples(&vals?)
    }

    pub fn atoms(&self) -> Option<(&[f64], &[f64])> {
        match self {
            EmpiricalAtoms { values, weights } => Some((values, weights)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_quantile_is_identity_on_unit() {
        let d = ScalarDistribution::uniform(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(d.quantile(0.5).unwrap(), 0.5);
    }

    #[test]
    fn exponential_quantile_closed_form() {
        let d = ScalarDistribution::exponential(1.0).unwrap();
        assert_abs_diff_eq!(d.quantile(0.9).unwrap(), -(0.1f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn empirical_quantile_left_inverse() {
        // Brute-force left inverse of the step cdf on three equal atoms.
        let d = ScalarDistribution::empirical(vec![1.0, 2.0, 3.0], vec![1.0 / 3.0; 3]).unwrap();
        let brute = |t: f64| {
            let mut x = 1.0;
            for cand in [1.0, 2.0, 3.0] {
                x = cand;
                if d.cdf(cand) >= t {
                    break;
                }
            }
            x
        };
        assert_eq!(d.quantile(0.5).unwrap(), 2.0);
        assert_eq!(d.quantile(0.5).unwrap(), brute(0.5));
        assert_eq!(d.quantile(1.0 / 3.0).unwrap(), brute(1.0 / 3.0));
        assert_eq!(d.quantile(0.34).unwrap(), brute(0.34));
    }

    #[test]
    fn quantile_rejects_levels_outside_unit_interval() {
        let d = ScalarDistribution::uniform(0.0, 1.0).unwrap();
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
        assert!(d.quantile(-0.3).is_err());
    }

    #[test]
    fn pareto_needs_finite_mean() {
        assert!(ScalarDistribution::pareto(1.0, 1.0).is_err());
        assert!(ScalarDistribution::pareto(2.5, 1.0).is_ok());
    }

    #[test]
    fn partial_means_sum_to_mean() {
        for d in [
            ScalarDistribution::uniform(0.2, 1.7).unwrap(),
            ScalarDistribution::exponential(0.7).unwrap(),
            ScalarDistribution::lognormal(0.1, 0.8).unwrap(),
            ScalarDistribution::pareto(2.5, 1.3).unwrap(),
        ] {
            let mid = d.quantile(0.37).unwrap();
            let lo = Interval::new(f64::NEG_INFINITY, mid);
            let hi = Interval::new(mid, f64::INFINITY);
            assert_abs_diff_eq!(
                d.partial_mean(lo) + d.partial_mean(hi),
                d.mean(),
                epsilon = 1e-10 * (1.0 + d.mean().abs())
            );
        }
    }

    #[test]
    fn exponential_second_moment() {
        let d = ScalarDistribution::exponential(1.0).unwrap();
        let full = Interval::new(f64::NEG_INFINITY, f64::INFINITY);
        assert_abs_diff_eq!(d.partial_sq(full), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn es_closed_forms() {
        let u = ScalarDistribution::uniform(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(u.es(0.9).unwrap(), 0.95, epsilon = 1e-12);
        let e = ScalarDistribution::exponential(1.0).unwrap();
        assert_abs_diff_eq!(e.es(0.9).unwrap(), 1.0 - 0.1f64.ln(), epsilon = 1e-12);
        let point = ScalarDistribution::point_mass(5.0);
        assert_abs_diff_eq!(point.es(0.3).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_matches_cdf() {
        let d = ScalarDistribution::exponential(1.0).unwrap();
        let mut rng = stream(11, 0);
        let xs = d.sample_vec(&mut rng, 200_000);
        let below = xs.iter().filter(|&&x| x <= 1.0).count() as f64 / xs.len() as f64;
        assert_abs_diff_eq!(below, d.cdf(1.0), epsilon = 5e-3);
    }

    #[test]
    fn scaled_laws_match_scaled_quantiles() {
        let d = ScalarDistribution::lognormal(0.0, 1.0).unwrap();
        let s = d.scaled(2.5).unwrap();
        assert_abs_diff_eq!(
            s.quantile(0.7).unwrap(),
            2.5 * d.quantile(0.7).unwrap(),
            epsilon = 1e-10
        );
    }
}
