//! Stationary association rules evaluated at arbitrary locations.
//!
//! All scores live in the log domain: `ln P + ln H - (a/2) ln d^2`. A location
//! that coincides with an AP scores `+inf` for that AP.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::point_log_gain;
use crate::pointprocess::{Point, PointPattern, TierConfig, Window};
use crate::rng::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationStrategy {
    #[default]
    MaxPower,
    MaxSir,
    Nearest,
}

impl AssociationStrategy {
    pub const ALL: [Self; 3] = [Self::MaxPower, Self::MaxSir, Self::Nearest];

    pub fn uses_gains(self) -> bool {
        !matches!(self, Self::Nearest)
    }
}

/// Log-domain association score. `Score(f64::INFINITY)` marks an AP sitting on the location.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Score(pub f64);

impl Score {
    pub fn linear(self) -> f64 {
        self.0.exp()
    }

    pub fn is_atom(self) -> bool {
        self.0 == f64::INFINITY
    }
}

/// Source of `ln H_n(y)` at the location currently being evaluated.
pub trait GainAccess {
    fn log_gain(&self, ap: usize) -> f64;
}

impl<F: Fn(usize) -> f64> GainAccess for F {
    fn log_gain(&self, ap: usize) -> f64 {
        self(ap)
    }
}

/// Per-AP gain marks reused at every location.
pub struct ApGains<'a>(pub &'a PointPattern);

impl GainAccess for ApGains<'_> {
    #[inline]
    fn log_gain(&self, ap: usize) -> f64 {
        self.0.gain_marks[ap].ln()
    }
}

/// Independent gains per (AP, pixel), recomputed from the counter-based stream.
pub struct PixelGains<'a> {
    pub pattern: &'a PointPattern,
    pub tiers: &'a [TierConfig],
    pub key: StreamKey,
    pub pixel: usize,
}

impl GainAccess for PixelGains<'_> {
    fn log_gain(&self, ap: usize) -> f64 {
        let model = &self.tiers[self.pattern.tier_marks[ap]].fading;
        point_log_gain(model, self.key, ap, self.pixel)
    }
}

/// No fading at all.
pub struct UnitGains;

impl GainAccess for UnitGains {
    fn log_gain(&self, _ap: usize) -> f64 {
        0.0
    }
}

/// Per-AP constants of the received-power field.
#[derive(Debug, Clone)]
pub struct LinkTable {
    pub log_power: Vec<f64>,
    pub half_exponent: Vec<f64>,
}

impl LinkTable {
    pub fn new(pattern: &PointPattern, tiers: &[TierConfig]) -> Result<Self> {
        pattern.check_consistent()?;
        if let Some(&bad) = pattern.tier_marks.iter().find(|&&t| t >= tiers.len()) {
            return Err(Error::Mismatch(format!(
                "tier mark {bad} but only {} tiers configured",
                tiers.len()
            )));
        }
        Ok(Self {
            log_power: pattern.tier_marks.iter().map(|&t| tiers[t].power.ln()).collect(),
            half_exponent: pattern
                .tier_marks
                .iter()
                .map(|&t| 0.5 * tiers[t].path_loss_exponent)
                .collect(),
        })
    }
}

/// `ln P + ln H - (a/2) ln d^2`, or `+inf` at distance zero.
///
/// Every code path that ranks APs goes through this function so that
/// independent traversals produce bit-identical scores.
#[inline]
pub fn log_received(log_power_gain: f64, half_exponent: f64, d2: f64) -> f64 {
    if d2 == 0.0 {
        f64::INFINITY
    } else {
        log_power_gain - half_exponent * d2.ln()
    }
}

/// Nearest-AP score: `-ln d`.
#[inline]
pub fn log_proximity(d2: f64) -> f64 {
    log_received(0.0, 0.5, d2)
}

/// First index attaining the maximum.
#[inline]
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (n, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = n;
        }
    }
    best
}

/// Log SIR of every AP given the log received powers, in AP order.
pub fn log_sir(log_rx: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let peak = log_rx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::INFINITY {
        out.extend(log_rx.iter().map(|&l| {
            if l == f64::INFINITY {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }));
        return;
    }
    let total: f64 = log_rx.iter().map(|&l| (l - peak).exp()).sum();
    out.extend(log_rx.iter().map(|&l| {
        let own = (l - peak).exp();
        let others = total - own;
        if others <= 0.0 {
            f64::INFINITY
        } else {
            (l - peak) - others.ln()
        }
    }));
}

/// Max-SIR winner. Rounded ratios that tie are ordered by received power,
/// which orders the exact ratios strictly.
pub fn argmax_sir(log_sir: &[f64], log_rx: &[f64]) -> usize {
    let mut best = 0;
    for n in 1..log_sir.len() {
        let better = log_sir[n] > log_sir[best] || (log_sir[n] == log_sir[best] && log_rx[n] > log_rx[best]);
        if better {
            best = n;
        }
    }
    best
}

/// Log received power of every AP at `y`.
pub fn log_received_powers(
    y: Point,
    pattern: &PointPattern,
    links: &LinkTable,
    window: &Window,
    gains: &impl GainAccess,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.extend(pattern.points.iter().enumerate().map(|(n, &p)| {
        log_received(
            links.log_power[n] + gains.log_gain(n),
            links.half_exponent[n],
            window.dist2(y, p),
        )
    }));
}

fn check_nonempty(pattern: &PointPattern) -> Result<()> {
    if pattern.is_empty() {
        Err(Error::EmptyPattern { attempts: 0 })
    } else {
        Ok(())
    }
}

/// Per-AP scores of `strategy` at `y`.
pub fn scores(
    y: Point,
    pattern: &PointPattern,
    tiers: &[TierConfig],
    window: &Window,
    strategy: AssociationStrategy,
    gains: &impl GainAccess,
) -> Result<Vec<Score>> {
    check_nonempty(pattern)?;
    let links = LinkTable::new(pattern, tiers)?;
    let mut rx = Vec::with_capacity(pattern.len());
    let values = match strategy {
        AssociationStrategy::Nearest => pattern
            .points
            .iter()
            .map(|&p| log_proximity(window.dist2(y, p)))
            .collect(),
        AssociationStrategy::MaxPower => {
            log_received_powers(y, pattern, &links, window, gains, &mut rx);
            rx
        }
        AssociationStrategy::MaxSir => {
            log_received_powers(y, pattern, &links, window, gains, &mut rx);
            let mut sir = Vec::with_capacity(rx.len());
            log_sir(&rx, &mut sir);
            sir
        }
    };
    Ok(values.into_iter().map(Score).collect())
}

/// Index of the AP serving location `y`; ties go to the smallest index.
pub fn serving_ap(
    y: Point,
    pattern: &PointPattern,
    tiers: &[TierConfig],
    window: &Window,
    strategy: AssociationStrategy,
    gains: &impl GainAccess,
) -> Result<usize> {
    check_nonempty(pattern)?;
    let links = LinkTable::new(pattern, tiers)?;
    Ok(serve_with(
        y,
        pattern,
        &links,
        window,
        strategy,
        gains,
        &mut Vec::new(),
        &mut Vec::new(),
    ))
}

/// Allocation-free core of [`serving_ap`] for callers that evaluate many locations.
#[allow(clippy::too_many_arguments)]
pub fn serve_with(
    y: Point,
    pattern: &PointPattern,
    links: &LinkTable,
    window: &Window,
    strategy: AssociationStrategy,
    gains: &impl GainAccess,
    rx: &mut Vec<f64>,
    sir: &mut Vec<f64>,
) -> usize {
    match strategy {
        AssociationStrategy::Nearest => {
            rx.clear();
            rx.extend(pattern.points.iter().map(|&p| log_proximity(window.dist2(y, p))));
            argmax_first(rx)
        }
        AssociationStrategy::MaxPower => {
            log_received_powers(y, pattern, links, window, gains, rx);
            argmax_first(rx)
        }
        AssociationStrategy::MaxSir => {
            log_received_powers(y, pattern, links, window, gains, rx);
            log_sir(rx, sir);
            argmax_sir(sir, rx)
        }
    }
}
