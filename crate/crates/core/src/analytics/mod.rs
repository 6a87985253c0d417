//! Mean association areas, association probabilities and Campbell functionals
//! of Poisson multi-tier networks under max-power association.
//!
//! With `u = r^2` and `t = ln u`, the mean area of a typical tier-`i` cell is
//!
//! ```text
//! pi * Int e^t E[ exp(-pi * sum_k lt_k e^{t a_i/a_k} (P_i H_i)^{-2/a_k}) ] dt
//! ```
//!
//! where `lt_k = lambda_k P_k^{2/a_k} E[H_k^{2/a_k}]` is the transformed density.
//! The expectation over `H_i` uses a Gauss rule in log-gain whose node count is
//! doubled until the integral stops moving; the `t` integral is adaptive
//! Gauss-Kronrod on the range where the integrand exceeds `1e-14` of its peak.

pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fading::{fractional_moment, FadingModel};
use crate::pointprocess::{validate_tiers, TierConfig};
pub use quadrature::QuadratureEstimate;

/// Relative accuracy promised for quadrature results.
pub const TARGET_RELATIVE_ERROR: f64 = 1e-8;
/// Node doubling stops once the integral changes by less than this (relative).
pub const NODE_DOUBLING_TOLERANCE: f64 = 1e-9;
/// The `t` range is cut where the integrand drops below this fraction of its peak.
pub const TAIL_CUTOFF: f64 = 1e-14;

const INNER_REL_TOL: f64 = 1e-12;
const MAX_SEGMENTS: usize = 20_000;
const MAX_HERMITE_NODES: usize = 128;
const MAX_LEGENDRE_PER_PANEL: usize = 128;
/// Log-gain span of an Exp(1) variable kept by the Legendre rule: e^-40 .. e^4.
const EXP_LOG_RANGE: (f64, f64) = (-40.0, 4.0);

/// Radial weight of a Campbell functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// g(r) = 1
    Constant,
    /// g(r) = r^-exponent
    PowerLaw { exponent: f64 },
}

impl Kernel {
    /// Exponent of `u = r^2` in `g(r)`.
    fn u_exponent(&self) -> f64 {
        match *self {
            Kernel::Constant => 0.0,
            Kernel::PowerLaw { exponent } => -0.5 * exponent,
        }
    }
}

/// Formula-based per-tier predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPrediction {
    pub per_tier_mean_area: Vec<f64>,
    pub per_tier_assoc_prob: Vec<f64>,
    pub transformed_densities: Vec<f64>,
    /// Closed form, present when all tiers share one path-loss exponent.
    pub closed_form_mean_area: Option<Vec<f64>>,
    pub quadrature_mean_area: Vec<QuadratureEstimate>,
}

/// `lambda_k P_k^{2/a_k} E[H_k^{2/a_k}]` for every tier.
pub fn transformed_densities(tiers: &[TierConfig]) -> Result<Vec<f64>> {
    validate_tiers(tiers)?;
    tiers
        .iter()
        .map(|t| {
            let delta = 2.0 / t.path_loss_exponent;
            Ok(t.density * t.power.powf(delta) * fractional_moment(&t.fading, delta)?)
        })
        .collect()
}

/// Common path-loss exponent, if any.
pub fn common_exponent(tiers: &[TierConfig]) -> Option<f64> {
    let a = tiers.first()?.path_loss_exponent;
    tiers
        .iter()
        .all(|t| (t.path_loss_exponent - a).abs() <= 1e-12 * a)
        .then_some(a)
}

/// Mean typical-cell area per tier for a common path-loss exponent:
/// `P_i^{2/a} E[H_i^{2/a}] / sum_k lambda_k P_k^{2/a} E[H_k^{2/a}]`.
pub fn mean_area_closed_form(tiers: &[TierConfig]) -> Result<Vec<f64>> {
    validate_tiers(tiers)?;
    let Some(a) = common_exponent(tiers) else {
        return Err(Error::UnequalExponents(
            tiers.iter().map(|t| t.path_loss_exponent).collect(),
        ));
    };
    let delta = 2.0 / a;
    let numerators = tiers
        .iter()
        .map(|t| Ok(t.power.powf(delta) * fractional_moment(&t.fading, delta)?))
        .collect::<Result<Vec<f64>>>()?;
    let denominator: f64 = tiers.iter().zip(&numerators).map(|(t, n)| t.density * n).sum();
    Ok(numerators.iter().map(|n| n / denominator).collect())
}

/// Log-gain rule for `E[f(ln H)]`; `level` 0 is the coarsest.
fn gain_rule(model: &FadingModel, level: u32) -> Option<quadrature::Rule> {
    match *model {
        FadingModel::Deterministic | FadingModel::LogNormal { sigma: 0.0 } => (level == 0).then(|| quadrature::Rule {
            nodes: vec![0.0],
            weights: vec![1.0],
        }),
        FadingModel::LogNormal { sigma } => {
            let n = 16usize << level;
            (n <= MAX_HERMITE_NODES).then(|| {
                let rule = quadrature::gauss_hermite_normal(n);
                quadrature::Rule {
                    nodes: rule.nodes.iter().map(|z| sigma * z).collect(),
                    weights: rule.weights,
                }
            })
        }
        FadingModel::Exponential { scale } => {
            // ln H = ln(scale) + s, s = ln X with X ~ Exp(1): density e^{s - e^s}
            let per_panel = 4usize << level;
            (per_panel <= MAX_LEGENDRE_PER_PANEL).then(|| {
                let base = quadrature::gauss_legendre(per_panel);
                let (lo, hi) = EXP_LOG_RANGE;
                let panels = (hi - lo) as usize;
                let mut rule = quadrature::Rule {
                    nodes: Vec::with_capacity(panels * per_panel),
                    weights: Vec::with_capacity(panels * per_panel),
                };
                for p in 0..panels {
                    let mid = lo + p as f64 + 0.5;
                    for (x, w) in base.nodes.iter().zip(&base.weights) {
                        let s = mid + 0.5 * x;
                        rule.nodes.push(scale.ln() + s);
                        rule.weights.push(0.5 * w * (s - s.exp()).exp());
                    }
                }
                rule
            })
        }
    }
}

/// Integrand pieces shared by the mean-area and Campbell integrals of tier `i`.
struct RadialProblem {
    /// (coefficient pi * lt_k * P_i^{-2/a_k}, a_i / a_k, 2 / a_k)
    terms: Vec<(f64, f64, f64)>,
    /// Power of `u` multiplying the void probability, plus one for `du = e^t dt`.
    growth: f64,
    /// Lower limit in `t`, if the integral starts at a positive radius.
    t_min: Option<f64>,
}

impl RadialProblem {
    fn new(tiers: &[TierConfig], i: usize, u_exponent: f64, cutoff: f64) -> Result<Self> {
        let lt = transformed_densities(tiers)?;
        let target = tiers
            .get(i)
            .ok_or_else(|| invalid("tier_index", format!("{i} out of range for {} tiers", tiers.len())))?;
        let terms = tiers
            .iter()
            .zip(&lt)
            .map(|(t, l)| {
                let two_over = 2.0 / t.path_loss_exponent;
                (
                    std::f64::consts::PI * l * target.power.powf(-two_over),
                    target.path_loss_exponent / t.path_loss_exponent,
                    two_over,
                )
            })
            .collect();
        Ok(Self {
            terms,
            growth: 1.0 + u_exponent,
            t_min: (cutoff > 0.0).then(|| 2.0 * cutoff.ln()),
        })
    }

    /// `e^{growth t} E[exp(-sum_k c_k e^{t r_k} H^{-s_k})]` under `rule`.
    fn integrand(&self, rule: &quadrature::Rule, t: f64) -> f64 {
        let mut total = 0.0;
        for (v, w) in rule.nodes.iter().zip(&rule.weights) {
            if *w == 0.0 {
                continue;
            }
            let mut exponent = self.growth * t;
            for &(c, ratio, s) in &self.terms {
                exponent -= c * (ratio * t - s * v).exp();
            }
            total += w * exponent.exp();
        }
        total
    }

    /// Place where the sum in the exponent reaches one at the median gain.
    fn pivot(&self) -> f64 {
        self.terms
            .iter()
            .map(|&(c, ratio, _)| -c.ln() / ratio)
            .fold(f64::INFINITY, f64::min)
    }

    /// Breakpoints in `t` covering everything above `TAIL_CUTOFF` of the peak.
    fn support(&self, rule: &quadrature::Rule) -> Vec<f64> {
        let f = |t: f64| self.integrand(rule, t);
        let pivot = self.pivot();
        let start = self.t_min.map_or(pivot, |m| m.max(pivot));

        // coarse scan for the peak
        let mut peak_t = start;
        let mut peak = f(start);
        let mut t = self.t_min.unwrap_or(pivot - 60.0).max(pivot - 60.0);
        while t <= pivot + 200.0 {
            let v = f(t);
            if v > peak {
                peak = v;
                peak_t = t;
            }
            t += 0.5;
        }
        if let Some(m) = self.t_min {
            let v = f(m);
            if v > peak {
                peak = v;
                peak_t = m;
            }
        }
        let threshold = TAIL_CUTOFF * peak;

        let mut lo = peak_t;
        loop {
            if let Some(m) = self.t_min {
                if lo - 1.0 <= m {
                    lo = m;
                    break;
                }
            }
            lo -= 1.0;
            if f(lo) < threshold || lo < pivot - 1e5 {
                break;
            }
        }
        let mut hi = peak_t;
        let mut below = 0;
        while below < 8 && hi < pivot + 1e4 {
            hi += 0.5;
            if f(hi) < threshold {
                below += 1;
            } else {
                below = 0;
            }
        }
        let pieces = ((hi - lo) / 2.0).ceil().clamp(1.0, 4000.0) as usize;
        (0..=pieces)
            .map(|k| lo + (hi - lo) * k as f64 / pieces as f64)
            .collect()
    }

    /// `pi * Int integrand dt`, doubling gain nodes until stable.
    fn evaluate(&self, model: &FadingModel) -> Result<QuadratureEstimate> {
        let mut previous: Option<QuadratureEstimate> = None;
        let mut evaluations = 0;
        for level in 0.. {
            let Some(rule) = gain_rule(model, level) else {
                break;
            };
            let breaks = self.support(&rule);
            let est = quadrature::integrate(|t| self.integrand(&rule, t), &breaks, INNER_REL_TOL, 0.0, MAX_SEGMENTS);
            evaluations += est.evaluations;
            let current = QuadratureEstimate {
                value: std::f64::consts::PI * est.value,
                error: std::f64::consts::PI * est.error,
                evaluations,
            };
            let stable = match previous {
                None => model.is_degenerate(),
                Some(prev) => (current.value - prev.value).abs() <= NODE_DOUBLING_TOLERANCE * current.value.abs(),
            };
            if stable {
                let doubling = previous.map_or(0.0, |p| (current.value - p.value).abs());
                let result = QuadratureEstimate {
                    error: current.error + doubling,
                    ..current
                };
                if result.relative_error() > TARGET_RELATIVE_ERROR || !result.value.is_finite() {
                    return Err(Error::QuadratureNotConverged {
                        value: result.value,
                        error: result.error,
                    });
                }
                return Ok(result);
            }
            previous = Some(current);
        }
        let last = previous.unwrap_or(QuadratureEstimate {
            value: f64::NAN,
            error: f64::INFINITY,
            evaluations,
        });
        Err(Error::QuadratureNotConverged {
            value: last.value,
            error: last.error,
        })
    }
}

/// Mean area of a typical tier-`i` cell from the radial void-probability integral.
/// Works for arbitrary exponents.
pub fn mean_area_integral(tiers: &[TierConfig], i: usize) -> Result<QuadratureEstimate> {
    let problem = RadialProblem::new(tiers, i, 0.0, 0.0)?;
    problem.evaluate(&tiers[i].fading)
}

/// Per-tier mean areas: closed form when exponents agree, quadrature otherwise.
pub fn mean_areas(tiers: &[TierConfig]) -> Result<Vec<f64>> {
    if common_exponent(tiers).is_some() {
        mean_area_closed_form(tiers)
    } else {
        (0..tiers.len())
            .map(|i| mean_area_integral(tiers, i).map(|e| e.value))
            .collect()
    }
}

/// `A_i = lambda_i * mean area_i`, the probability that a typical user is served by tier `i`.
pub fn association_probability(tiers: &[TierConfig]) -> Result<Vec<f64>> {
    let areas = mean_areas(tiers)?;
    Ok(tiers.iter().zip(areas).map(|(t, m)| t.density * m).collect())
}

/// Mean of `sum_j g(|Y_j|) 1(Y_j in C(T_0))` over an independent Poisson user process of
/// intensity `user_density`, for a typical tier-`i` cell, restricted to `|y| >= cutoff`.
pub fn campbell_functional(
    tiers: &[TierConfig],
    i: usize,
    kernel: Kernel,
    user_density: f64,
    cutoff: f64,
) -> Result<QuadratureEstimate> {
    if !(user_density.is_finite() && user_density > 0.0) {
        return Err(invalid("user_density", format!("{user_density} is not > 0")));
    }
    if !(cutoff.is_finite() && cutoff >= 0.0) {
        return Err(invalid("cutoff", format!("{cutoff} is not >= 0")));
    }
    if let Kernel::PowerLaw { exponent } = kernel {
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(invalid("exponent", format!("{exponent} is not >= 0")));
        }
        if exponent >= 2.0 && cutoff == 0.0 {
            return Err(Error::Divergent(format!(
                "kernel r^-{exponent} makes Int_0 r^(1-{exponent}) dr infinite; use a positive cutoff"
            )));
        }
    }
    let problem = RadialProblem::new(tiers, i, kernel.u_exponent(), cutoff)?;
    let est = problem.evaluate(&tiers[i].fading)?;
    Ok(QuadratureEstimate {
        value: user_density * est.value,
        error: user_density * est.error,
        evaluations: est.evaluations,
    })
}

/// All formula-based quantities for a tier list.
pub fn predict(tiers: &[TierConfig]) -> Result<AnalyticPrediction> {
    let transformed = transformed_densities(tiers)?;
    let closed = match mean_area_closed_form(tiers) {
        Ok(v) => Some(v),
        Err(Error::UnequalExponents(_)) => None,
        Err(e) => return Err(e),
    };
    let quadrature = (0..tiers.len())
        .map(|i| mean_area_integral(tiers, i))
        .collect::<Result<Vec<_>>>()?;
    let mean: Vec<f64> = closed
        .clone()
        .unwrap_or_else(|| quadrature.iter().map(|q| q.value).collect());
    Ok(AnalyticPrediction {
        per_tier_assoc_prob: tiers.iter().zip(&mean).map(|(t, m)| t.density * m).collect(),
        per_tier_mean_area: mean,
        transformed_densities: transformed,
        closed_form_mean_area: closed,
        quadrature_mean_area: quadrature,
    })
}
