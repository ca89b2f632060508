//! Families of perturbed models `Z` at controlled distance from `X`.
//!
//! Each family maps a size parameter `eps` to an index-coupled sampler of
//! `(X, Z)`. `Shift` and `Scale` stay in closed form (the perturbed law is an
//! affine image of `X`), `UniformNudge` realizes the absolutely-continuous
//! construction that moves mass out of a protected region by an independent
//! uniform step clamped to the support, and `TailSpike` adds a rare huge
//! spike: weak distance `~ mass` while moments explode.

use crate::dist::ScalarDistribution;
use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::metrics::MetricKind;
use crate::sampling::{open_unit, stream, symmetric_uniform};
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub enum PerturbationFamily {
    /// `Z = X + eps`.
    Shift,
    /// `Z = (1 + eps) X`.
    Scale,
    /// The clamped-nudge construction: with `B = {x : phi(x) > a}` and
    /// support `R`, `Z = X` on `B` or when `X + U` leaves `R`, otherwise
    /// `Z = X + U` for `U ~ Uniform(-eps, eps)` independent of `X`.
    /// Guarantees `|Z - X| <= eps` samplewise, an absolutely continuous law,
    /// and `P(phi(Z) <= a) < p` when `P(phi(X) <= a) = p`.
    UniformNudge {
        phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        a: f64,
        /// Replace the independent-uniform coupling by the quantile coupling
        /// `Z = F_Z^{-1}(F_X(X))` (estimated from the sample itself).
        quantile_coupled: bool,
    },
    /// `Z = X + height(eps)` with probability `mass(eps)`, else `X`, where
    /// `mass = min(mass_scale * eps, 1/2)` and
    /// `height = height_scale * eps^{-height_power}`.
    TailSpike { mass_scale: f64, height_scale: f64, height_power: f64 },
}

impl fmt::Debug for PerturbationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbationFamily::Shift => write!(f, "Shift"),
            PerturbationFamily::Scale => write!(f, "Scale"),
            PerturbationFamily::UniformNudge { a, quantile_coupled, .. } => write!(
                f,
                "UniformNudge {{ a: {a}, quantile_coupled: {quantile_coupled} }}"
            ),
            PerturbationFamily::TailSpike { mass_scale, height_scale, height_power } => write!(
                f,
                "TailSpike {{ mass_scale: {mass_scale}, height_scale: {height_scale}, height_power: {height_power} }}"
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledSamples {
    pub base: Vec<f64>,
    pub perturbed: Vec<f64>,
}

impl PerturbationFamily {
    /// Nudge family protecting the upper tail `{x > VaR_p(X)}`; the usual
    /// adversary against quantile-threshold positions.
    pub fn nudge_at_quantile(model: &MarketModel, p: f64) -> Result<Self> {
        let a = model.x().quantile(p)?;
        Ok(PerturbationFamily::UniformNudge {
            phi: Arc::new(|x| x),
            a,
            quantile_coupled: false,
        })
    }

    pub fn tail_spike() -> Self {
        PerturbationFamily::TailSpike { mass_scale: 1.0, height_scale: 1.0, height_power: 2.0 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PerturbationFamily::Shift => "shift",
            PerturbationFamily::Scale => "scale",
            PerturbationFamily::UniformNudge { .. } => "uniform_nudge",
            PerturbationFamily::TailSpike { .. } => "tail_spike",
        }
    }

    pub fn spike_mass(&self, eps: f64) -> Option<f64> {
        match self {
            PerturbationFamily::TailSpike { mass_scale, .. } => {
                Some((mass_scale * eps).min(0.5))
            }
            _ => None,
        }
    }

    pub fn spike_height(&self, eps: f64) -> Option<f64> {
        match self {
            PerturbationFamily::TailSpike { height_scale, height_power, .. } => {
                Some(height_scale * eps.powf(-height_power))
            }
            _ => None,
        }
    }

    /// When `Z = slope X + shift` exactly, the transform; lets the probe
    /// evaluate risks of `g(Z)` in closed form for any base family.
    pub fn analytic_input_transform(&self, eps: f64) -> Option<(f64, f64)> {
        match self {
            PerturbationFamily::Shift => Some((1.0, eps)),
            PerturbationFamily::Scale => Some((1.0 + eps, 0.0)),
            _ => None,
        }
    }

    /// The law of `Z` when representable in the shipped families.
    pub fn analytic_z_law(&self, model: &MarketModel, eps: f64) -> Option<ScalarDistribution> {
        match self {
            PerturbationFamily::Shift => model.x().shifted(eps),
            PerturbationFamily::Scale => model.x().scaled(1.0 + eps),
            _ => None,
        }
    }

    /// Closed-form distance between the coupled pair where one exists.
    pub fn analytic_distance(
        &self,
        model: &MarketModel,
        eps: f64,
        metric: MetricKind,
    ) -> Option<f64> {
        match self {
            PerturbationFamily::Shift => match metric {
                MetricKind::LInf | MetricKind::Lq { .. } => Some(eps),
                MetricKind::ProkhorovWeak => None,
            },
            PerturbationFamily::Scale => match metric {
                MetricKind::LInf => {
                    let (_, hi) = model.x().support();
                    hi.is_finite().then_some(eps * hi)
                }
                MetricKind::Lq { q } => {
                    let full = crate::market::FULL_LINE;
                    if (q - 1.0).abs() < 1e-12 {
                        Some(eps * model.x().mean())
                    } else if (q - 2.0).abs() < 1e-12 {
                        Some(eps * model.x().partial_sq(full).sqrt())
                    } else {
                        None
                    }
                }
                MetricKind::ProkhorovWeak => None,
            },
            PerturbationFamily::UniformNudge { .. } => match metric {
                // |Z - X| <= eps samplewise with the bound approached.
                MetricKind::LInf => Some(eps),
                _ => None,
            },
            PerturbationFamily::TailSpike { .. } => {
                let mass = self.spike_mass(eps)?;
                let height = self.spike_height(eps)?;
                match metric {
                    MetricKind::LInf => Some(height),
                    MetricKind::Lq { q } => Some((mass * height.powf(q)).powf(1.0 / q)),
                    // The displaced mass lands far outside the bulk, so the
                    // weak distance equals the displaced mass.
                    MetricKind::ProkhorovWeak => Some(mass.min(1.0)),
                }
            }
        }
    }

    /// Verifies the nudge hypothesis `P(phi(X) <= a) = p` within 1e-6
    /// (deterministic quantile grid).
    pub fn validate_against(&self, model: &MarketModel, p: f64) -> Result<()> {
        if let PerturbationFamily::UniformNudge { phi, a, .. } = self {
            let n = 2_000_000;
            let mut below = 0usize;
            for i in 0..n {
                let u = (i as f64 + 0.5) / n as f64;
                let x = model.x().quantile(u)?;
                if phi(x) <= *a {
                    below += 1;
                }
            }
            let frac = below as f64 / n as f64;
            if (frac - p).abs() > 1e-6 + 1.0 / n as f64 {
                return Err(Error::domain(format!(
                    "nudge hypothesis violated: P(phi(X) <= a) = {frac:.8}, expected {p:.8}"
                )));
            }
        }
        Ok(())
    }

    /// Index-coupled draw of `(X, Z_eps)`.
    pub fn sample_coupled(
        &self,
        model: &MarketModel,
        eps: f64,
        n: usize,
        seed: u64,
    ) -> Result<CoupledSamples> {
        if !(eps >= 0.0) {
            return Err(Error::domain(format!("perturbation size must be >= 0, got {eps}")));
        }
        let mut x_rng = stream(seed, 0);
        let base = model.x().sample_vec(&mut x_rng, n);
        let perturbed = match self {
            PerturbationFamily::Shift => base.iter().map(|x| x + eps).collect(),
            PerturbationFamily::Scale => base.iter().map(|x| (1.0 + eps) * x).collect(),
            PerturbationFamily::UniformNudge { phi, a, quantile_coupled } => {
                let (lo, hi) = model.x().support();
                let mut u_rng = stream(seed, 1);
                let moved: Vec<f64> = base
                    .iter()
                    .map(|&x| {
                        let u = symmetric_uniform(&mut u_rng, eps);
                        let candidate = x + u;
                        if phi(x) > *a || candidate < lo || candidate > hi {
                            x
                        } else {
                            candidate
                        }
                    })
                    .collect();
                if *quantile_coupled {
                    quantile_couple(&base, &moved)
                } else {
                    moved
                }
            }
            PerturbationFamily::TailSpike { .. } => {
                let mass = self.spike_mass(eps).expect("tail spike");
                let height = self.spike_height(eps).expect("tail spike");
                let mut u_rng = stream(seed, 1);
                base.iter()
                    .map(|&x| if open_unit(&mut u_rng) < mass { x + height } else { x })
                    .collect()
            }
        };
        Ok(CoupledSamples { base, perturbed })
    }
}

/// Quantile coupling: replace each perturbed draw by the empirical quantile
/// of the perturbed sample at the base sample's empirical rank. Never
/// increases the sup distance (estimator of the rearranged coupling).
fn quantile_couple(base: &[f64], moved: &[f64]) -> Vec<f64> {
    let n = base.len();
    let mut base_order: Vec<usize> = (0..n).collect();
    base_order.sort_by(|&i, &j| base[i].partial_cmp(&base[j]).expect("non-NaN"));
    let mut moved_sorted = moved.to_vec();
    moved_sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    let mut out = vec![0.0; n];
    for (rank, &i) in base_order.iter().enumerate() {
        out[i] = moved_sorted[rank];
    }
    out
}

/// One-sided binomial tail z-score for testing `P(success) < p0` given
/// `k` successes in `n` trials (normal approximation with continuity
/// correction; very negative z favours the strict inequality).
pub fn one_sided_binomial_z(k: usize, n: usize, p0: f64) -> f64 {
    let mean = n as f64 * p0;
    let sd = (n as f64 * p0 * (1.0 - p0)).sqrt();
    (k as f64 + 0.5 - mean) / sd
}
