//! Marked Poisson point processes of access points on a square torus.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fading::{self, FadingModel};
use crate::rng::{half_open_unit, Purpose, StreamKey};

/// Empty realizations are redrawn at most this many times.
pub const MAX_SAMPLING_ATTEMPTS: u32 = 16;

/// Point-stream lanes used by the per-tier superposition sampler.
const SUPERPOSITION_LANE: u32 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Square window `[0, side_length)^2` with wrap-around distances, rasterized
/// into `resolution x resolution` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub side_length: f64,
    pub resolution: usize,
}

impl Window {
    pub fn new(side_length: f64, resolution: usize) -> Result<Self> {
        let window = Self {
            side_length,
            resolution,
        };
        window.validate()?;
        Ok(window)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return Err(invalid("side_length", format!("{} is not > 0", self.side_length)));
        }
        if self.resolution < 2 {
            return Err(invalid("resolution", format!("{} is not >= 2", self.resolution)));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.side_length * self.side_length
    }

    pub fn pixel_side(&self) -> f64 {
        self.side_length / self.resolution as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_side() * self.pixel_side()
    }

    pub fn pixel_count(&self) -> usize {
        self.resolution * self.resolution
    }

    /// Center of pixel `(row, col)`; rows run along y.
    #[inline]
    pub fn pixel_center(&self, row: usize, col: usize) -> Point {
        let n = self.resolution as f64;
        Point::new(
            (col as f64 + 0.5) / n * self.side_length,
            (row as f64 + 0.5) / n * self.side_length,
        )
    }

    /// Row-major index of the pixel containing `p` (after wrapping into the window).
    pub fn pixel_of(&self, p: Point) -> usize {
        let n = self.resolution;
        let cell = |v: f64| {
            let w = v.rem_euclid(self.side_length);
            ((w / self.side_length * n as f64) as usize).min(n - 1)
        };
        cell(p.y) * n + cell(p.x)
    }

    /// Shortest signed coordinate difference on the circle of length `side_length`.
    #[inline]
    pub fn wrap(&self, d: f64) -> f64 {
        d - self.side_length * (d / self.side_length).round()
    }

    #[inline]
    pub fn displacement(&self, from: Point, to: Point) -> (f64, f64) {
        (self.wrap(to.x - from.x), self.wrap(to.y - from.y))
    }

    /// Squared toroidal distance.
    #[inline]
    pub fn dist2(&self, a: Point, b: Point) -> f64 {
        let (dx, dy) = self.displacement(a, b);
        dx * dx + dy * dy
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..self.side_length).contains(&p.x) && (0.0..self.side_length).contains(&p.y)
    }

    pub fn translate(&self, p: Point, by: Point) -> Point {
        Point::new(
            (p.x + by.x).rem_euclid(self.side_length),
            (p.y + by.y).rem_euclid(self.side_length),
        )
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * self.side_length, 0.5 * self.side_length)
    }
}

/// Physical parameters shared by all APs of one tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    /// APs per unit area.
    pub density: f64,
    /// Transmit power in linear units (watts).
    pub power: f64,
    pub path_loss_exponent: f64,
    pub fading: FadingModel,
}

impl TierConfig {
    pub fn new(density: f64, power: f64, path_loss_exponent: f64, fading: FadingModel) -> Self {
        Self {
            density,
            power,
            path_loss_exponent,
            fading,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(invalid("density", format!("{} is not > 0", self.density)));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(invalid("power", format!("{} is not > 0", self.power)));
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 2.0) {
            return Err(invalid(
                "path_loss_exponent",
                format!("{} is not > 2", self.path_loss_exponent),
            ));
        }
        self.fading.validate()
    }
}

pub fn validate_tiers(tiers: &[TierConfig]) -> Result<()> {
    if tiers.is_empty() {
        return Err(invalid("tiers", "at least one tier is required"));
    }
    tiers.iter().try_for_each(TierConfig::validate)
}

pub fn total_density(tiers: &[TierConfig]) -> f64 {
    tiers.iter().map(|t| t.density).sum()
}

/// One realization of AP locations with tier and gain marks.
///
/// Tier marks are zero-based indices into the tier list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    pub points: Vec<Point>,
    pub tier_marks: Vec<usize>,
    pub gain_marks: Vec<f64>,
    pub seed: StreamKey,
}

impl PointPattern {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tier_counts(&self, tiers: usize) -> Vec<usize> {
        let mut counts = vec![0; tiers];
        for &t in &self.tier_marks {
            counts[t] += 1;
        }
        counts
    }

    /// Same configuration moved by `by` on the torus; marks travel with their points.
    pub fn translated(&self, window: &Window, by: Point) -> Self {
        Self {
            points: self.points.iter().map(|&p| window.translate(p, by)).collect(),
            ..self.clone()
        }
    }

    pub fn check_consistent(&self) -> Result<()> {
        if self.points.len() != self.tier_marks.len() || self.points.len() != self.gain_marks.len() {
            return Err(Error::Mismatch(format!(
                "pattern has {} points, {} tier marks, {} gain marks",
                self.points.len(),
                self.tier_marks.len(),
                self.gain_marks.len()
            )));
        }
        Ok(())
    }
}

/// Homogeneous Poisson process of intensity `total_density` on the window.
///
/// Every point starts in tier 0 with unit gain. A realization with no points is
/// redrawn from the next resampling lane, up to [`MAX_SAMPLING_ATTEMPTS`] times.
pub fn sample_ppp(total_density: f64, window: &Window, key: StreamKey) -> Result<PointPattern> {
    if !(total_density.is_finite() && total_density > 0.0) {
        return Err(invalid("total_density", format!("{total_density} is not > 0")));
    }
    window.validate()?;
    let mean = total_density * window.area();
    let poisson = Poisson::new(mean).map_err(|e| invalid("total_density", e.to_string()))?;

    for attempt in 0..MAX_SAMPLING_ATTEMPTS {
        let mut rng = key.stream(Purpose::Points, attempt);
        let count = poisson.sample(&mut rng) as usize;
        if count == 0 {
            continue;
        }
        let side = window.side_length;
        let points = (0..count)
            .map(|_| {
                let x = rng.random::<f64>() * side;
                let y = rng.random::<f64>() * side;
                // guard against rounding up to the right edge
                Point::new(if x < side { x } else { 0.0 }, if y < side { y } else { 0.0 })
            })
            .collect();
        return Ok(PointPattern {
            points,
            tier_marks: vec![0; count],
            gain_marks: vec![1.0; count],
            seed: key,
        });
    }
    Err(Error::EmptyPattern {
        attempts: MAX_SAMPLING_ATTEMPTS,
    })
}

/// Independent thinning: each point gets tier `k` with probability `fractions[k]`.
pub fn assign_tiers(mut pattern: PointPattern, fractions: &[f64], key: StreamKey) -> Result<PointPattern> {
    check_probability_vector(fractions)?;
    let mut rng = key.stream(Purpose::Tiers, 0);
    let last = fractions.len() - 1;
    for mark in pattern.tier_marks.iter_mut() {
        let u = half_open_unit(rng.next_u64());
        let mut acc = 0.0;
        *mark = last;
        for (k, p) in fractions.iter().enumerate() {
            acc += p;
            if u < acc {
                *mark = k;
                break;
            }
        }
    }
    pattern.seed = key;
    Ok(pattern)
}

pub fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty vector".into()));
    }
    if let Some(bad) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {bad} is negative or not finite"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}, not 1")));
    }
    Ok(())
}

/// Tier fractions `p_k = density_k / total density`, normalized so they sum to one.
pub fn tier_fractions(tiers: &[TierConfig]) -> Vec<f64> {
    let total = total_density(tiers);
    let mut p: Vec<f64> = tiers.iter().map(|t| t.density / total).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

/// Full marked realization: Poisson locations, thinned tier marks and per-AP gain marks.
pub fn sample_network(tiers: &[TierConfig], window: &Window, key: StreamKey) -> Result<PointPattern> {
    validate_tiers(tiers)?;
    let pattern = sample_ppp(total_density(tiers), window, key)?;
    let mut pattern = assign_tiers(pattern, &tier_fractions(tiers), key)?;
    fading::assign_gain_marks(&mut pattern, tiers, key);
    Ok(pattern)
}

/// Independent per-tier Poisson processes merged in tier order (superposition route).
pub fn sample_superposition(tiers: &[TierConfig], window: &Window, key: StreamKey) -> Result<PointPattern> {
    validate_tiers(tiers)?;
    let mut merged = PointPattern {
        points: Vec::new(),
        tier_marks: Vec::new(),
        gain_marks: Vec::new(),
        seed: key,
    };
    for (k, tier) in tiers.iter().enumerate() {
        let mean = tier.density * window.area();
        let poisson = Poisson::new(mean).map_err(|e| invalid("density", e.to_string()))?;
        let mut rng = key.stream(Purpose::Points, SUPERPOSITION_LANE | k as u32);
        let count = poisson.sample(&mut rng) as usize;
        for _ in 0..count {
            let x = rng.random::<f64>() * window.side_length;
            let y = rng.random::<f64>() * window.side_length;
            merged.points.push(Point::new(x, y));
            merged.tier_marks.push(k);
            merged.gain_marks.push(1.0);
        }
    }
    if merged.is_empty() {
        return Err(Error::EmptyPattern { attempts: 1 });
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(side: f64) -> Window {
        Window::new(side, 10).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        let key = StreamKey::new(1, 0);
        assert!(sample_ppp(0.0, &window(10.0), key).is_err());
        assert!(sample_ppp(-1.0, &window(10.0), key).is_err());
        assert!(Window::new(0.0, 10).is_err());
        assert!(Window::new(10.0, 1).is_err());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let key = StreamKey::new(42, 5);
        let a = sample_ppp(1.0, &window(30.0), key).unwrap();
        let b = sample_ppp(1.0, &window(30.0), key).unwrap();
        assert_eq!(a, b);
        let c = sample_ppp(1.0, &window(30.0), StreamKey::new(42, 6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn points_lie_in_window_and_marks_align() {
        let w = window(7.5);
        let p = sample_ppp(3.0, &w, StreamKey::new(3, 0)).unwrap();
        assert!(p.points.iter().all(|&q| w.contains(q)));
        p.check_consistent().unwrap();
    }

    #[test]
    fn tiny_density_exhausts_retries() {
        // mean count 1e-12: every attempt is empty
        let err = sample_ppp(1e-14, &window(10.0), StreamKey::new(1, 0)).unwrap_err();
        assert_eq!(
            err,
            Error::EmptyPattern {
                attempts: MAX_SAMPLING_ATTEMPTS
            }
        );
    }

    #[test]
    fn count_mean_and_variance_match_poisson() {
        // density 1 on side 30: mean = variance = 900
        let w = window(30.0);
        let reps = 400;
        let counts: Vec<f64> = (0..reps)
            .map(|r| sample_ppp(1.0, &w, StreamKey::new(9, r)).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!(
            (mean - 900.0).abs() < 3.0 * (900.0f64 / reps as f64).sqrt(),
            "mean {mean}"
        );
        // sample variance of Poisson(900): sd ~ 900 * sqrt(2/(n-1))
        assert!(
            (var - 900.0).abs() < 4.0 * 900.0 * (2.0 / (reps - 1) as f64).sqrt(),
            "var {var}"
        );
    }

    #[test]
    fn single_tier_thinning_marks_everything_tier_zero() {
        let p = sample_ppp(1.0, &window(10.0), StreamKey::new(1, 0)).unwrap();
        let p = assign_tiers(p, &[1.0], StreamKey::new(1, 0)).unwrap();
        assert!(p.tier_marks.iter().all(|&t| t == 0));
    }

    #[test]
    fn thinning_fraction_is_binomial() {
        let w = window(100.0);
        let p = sample_ppp(10.0, &w, StreamKey::new(4, 0)).unwrap();
        let n = p.len() as f64;
        let p = assign_tiers(p, &[0.5, 0.5], StreamKey::new(4, 0)).unwrap();
        let ones = p.tier_marks.iter().filter(|&&t| t == 0).count() as f64;
        let se = (0.25 / n).sqrt();
        assert!((ones / n - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn probability_vector_is_checked() {
        assert!(check_probability_vector(&[0.5, 0.6]).is_err());
        assert!(check_probability_vector(&[1.2, -0.2]).is_err());
        assert!(check_probability_vector(&[]).is_err());
        assert!(check_probability_vector(&[0.3, 0.7]).is_ok());
    }

    #[test]
    fn torus_metric_wraps() {
        let w = window(10.0);
        let d2 = w.dist2(Point::new(0.5, 0.5), Point::new(9.5, 9.5));
        assert!((d2 - 2.0).abs() < 1e-12);
        assert_eq!(w.pixel_of(Point::new(9.99, 0.01)), 9);
        assert_eq!(w.pixel_of(Point::new(0.01, 9.99)), 90);
    }
}
