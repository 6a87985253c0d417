//! Slow reference implementations for tests.
//!
//! These share the random-stream layout and the per-location scoring rule with
//! the main path, so gain draws coincide and results can be compared exactly.
//! Everything else (tiling, culling, row streaming, threading) is left out.

use crate::association::{serve_with, ApGains, AssociationStrategy, LinkTable, PixelGains};
use crate::error::{Error, Result};
use crate::fading::{sample_gain, FadingModel, GainFieldMode};
use crate::pointprocess::{Point, PointPattern, TierConfig, Window};
use crate::rng::{Purpose, StreamKey};
use crate::tessellation::AssociationMap;

pub const MAX_ORACLE_APS: usize = 200;
pub const MAX_ORACLE_RESOLUTION: usize = 400;
pub const MIN_MOMENT_SAMPLES: usize = 100_000;

fn check_size(aps: usize, window: &Window) -> Result<()> {
    if aps > MAX_ORACLE_APS || window.resolution > MAX_ORACLE_RESOLUTION {
        return Err(Error::InstanceTooLarge(format!(
            "{aps} APs on a {r}x{r} grid; limit is {MAX_ORACLE_APS} APs and {MAX_ORACLE_RESOLUTION}^2 pixels",
            r = window.resolution
        )));
    }
    Ok(())
}

/// Pixel-by-pixel, AP-by-AP association map.
pub fn brute_force_map(
    pattern: &PointPattern,
    tiers: &[TierConfig],
    strategy: AssociationStrategy,
    gain_mode: GainFieldMode,
    window: &Window,
    key: StreamKey,
) -> Result<AssociationMap> {
    check_size(pattern.len(), window)?;
    if pattern.is_empty() {
        return Err(Error::EmptyPattern { attempts: 0 });
    }
    let links = LinkTable::new(pattern, tiers)?;
    let res = window.resolution;
    let mut grid = Vec::with_capacity(res * res);
    let (mut rx, mut sir) = (Vec::new(), Vec::new());
    for row in 0..res {
        for col in 0..res {
            let y = window.pixel_center(row, col);
            let ap = match gain_mode {
                GainFieldMode::PerAp => serve_with(
                    y,
                    pattern,
                    &links,
                    window,
                    strategy,
                    &ApGains(pattern),
                    &mut rx,
                    &mut sir,
                ),
                GainFieldMode::PerEvaluationPoint => {
                    let gains = PixelGains {
                        pattern,
                        tiers,
                        key,
                        pixel: row * res + col,
                    };
                    serve_with(y, pattern, &links, window, strategy, &gains, &mut rx, &mut sir)
                }
            };
            grid.push(ap as u32);
        }
    }
    AssociationMap::from_grid(*window, grid, pattern.len())
}

/// Voronoi map by direct comparison of squared torus distances.
///
/// Ties go to the lower index.
pub fn brute_force_voronoi(points: &[Point], window: &Window) -> Result<AssociationMap> {
    check_size(points.len(), window)?;
    if points.is_empty() {
        return Err(Error::EmptyPattern { attempts: 0 });
    }
    let res = window.resolution;
    let mut grid = Vec::with_capacity(res * res);
    for row in 0..res {
        for col in 0..res {
            let y = window.pixel_center(row, col);
            let mut best = 0;
            let mut best_d2 = f64::INFINITY;
            for (n, &p) in points.iter().enumerate() {
                let dx = window.wrap(p.x - y.x);
                let dy = window.wrap(p.y - y.y);
                let d2 = dx * dx + dy * dy;
                if d2 < best_d2 {
                    best = n;
                    best_d2 = d2;
                }
            }
            grid.push(best as u32);
        }
    }
    AssociationMap::from_grid(*window, grid, points.len())
}

/// Sample mean of `H^delta` and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSample {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: usize,
}

pub fn mc_fractional_moment(model: &FadingModel, delta: f64, samples: usize, seed: u64) -> Result<MomentSample> {
    if samples < MIN_MOMENT_SAMPLES {
        return Err(Error::InsufficientSamples {
            what: "fractional-moment samples",
            needed: MIN_MOMENT_SAMPLES,
            got: samples,
        });
    }
    let mut rng = StreamKey::new(seed, 0).stream(Purpose::ApGains, 0);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let v = sample_gain(model, &mut rng).powf(delta);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MomentSample {
        mean,
        standard_error: (var / n).sqrt(),
        samples,
    })
}
