//! Channel gain laws and their fractional moments.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::pointprocess::{PointPattern, TierConfig};
use crate::rng::{draw_pair, open_unit, standard_normal, Purpose, StreamKey};

/// Law of the channel power gain `H`.
///
/// `LogNormal { sigma }` means `ln H ~ N(0, sigma^2)` with `sigma` in natural-log units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    #[default]
    Deterministic,
    #[serde(rename = "lognormal")]
    LogNormal { sigma: f64 },
    Exponential {
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl FadingModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Deterministic => Ok(()),
            Self::LogNormal { sigma } if sigma.is_finite() && sigma >= 0.0 => Ok(()),
            Self::LogNormal { sigma } => Err(invalid("sigma", format!("{sigma} is not >= 0"))),
            Self::Exponential { scale } if scale.is_finite() && scale > 0.0 => Ok(()),
            Self::Exponential { scale } => Err(invalid("scale", format!("{scale} is not > 0"))),
        }
    }

    /// True when the gain is almost surely one.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Self::Deterministic | Self::LogNormal { sigma: 0.0 })
    }

    /// `ln H` from exactly one two-word draw.
    #[inline]
    pub fn log_gain_from(&self, pair: (u64, u64)) -> f64 {
        match *self {
            Self::Deterministic => 0.0,
            Self::LogNormal { sigma } => sigma * standard_normal(pair),
            Self::Exponential { scale } => (-open_unit(pair.0).ln() * scale).ln(),
        }
    }
}

/// Whether a single gain per AP is reused everywhere or redrawn per evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainFieldMode {
    #[default]
    PerAp,
    PerEvaluationPoint,
}

/// One gain draw. Consumes exactly two words of `rng`.
pub fn sample_gain<R: RngCore + ?Sized>(model: &FadingModel, rng: &mut R) -> f64 {
    match model {
        FadingModel::Deterministic => {
            draw_pair(rng);
            1.0
        }
        _ => model.log_gain_from(draw_pair(rng)).exp(),
    }
}

/// Exact `E[H^delta]` for `delta` in (0, 1].
pub fn fractional_moment(model: &FadingModel, delta: f64) -> Result<f64> {
    model.validate()?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::UnsupportedMoment {
            model: format!("{model:?}"),
            delta,
        });
    }
    let value = match *model {
        FadingModel::Deterministic => 1.0,
        FadingModel::LogNormal { sigma } => (0.5 * delta * delta * sigma * sigma).exp(),
        FadingModel::Exponential { scale } => scale.powf(delta) * gamma(1.0 + delta),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::UnsupportedMoment {
            model: format!("{model:?}"),
            delta,
        })
    }
}

/// Draws the per-AP gain marks. AP `n` takes draw `n` of the replication's AP-gain stream.
pub fn assign_gain_marks(pattern: &mut PointPattern, tiers: &[TierConfig], key: StreamKey) {
    let mut rng = key.stream(Purpose::ApGains, 0);
    for (gain, &tier) in pattern.gain_marks.iter_mut().zip(&pattern.tier_marks) {
        *gain = sample_gain(&tiers[tier].fading, &mut rng);
    }
}

/// `ln H_ap(y)` at pixel `pixel` in per-evaluation-point mode, addressed directly.
pub fn point_log_gain(model: &FadingModel, key: StreamKey, ap: usize, pixel: usize) -> f64 {
    if matches!(model, FadingModel::Deterministic) {
        return 0.0;
    }
    let mut rng = key.stream_at(Purpose::PointGains, ap as u32, pixel as u64);
    model.log_gain_from(draw_pair(&mut rng))
}

/// Fills `out` with `ln H_ap` for the consecutive pixels starting at `first_pixel`.
///
/// Produces the same values as repeated [`point_log_gain`] calls.
pub fn fill_point_log_gains(model: &FadingModel, key: StreamKey, ap: usize, first_pixel: usize, out: &mut [f64]) {
    if matches!(model, FadingModel::Deterministic) {
        out.fill(0.0);
        return;
    }
    let mut rng = key.stream_at(Purpose::PointGains, ap as u32, first_pixel as u64);
    for v in out.iter_mut() {
        *v = model.log_gain_from(draw_pair(&mut rng));
    }
}
