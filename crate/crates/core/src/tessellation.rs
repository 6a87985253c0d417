//! Rasterized association cells.
//!
//! Pixel centers are assigned with the same scoring functions as
//! [`association::serving_ap`]. Two traversals are used:
//!
//! * nearest and max-power with per-AP gains: the grid is cut into square tiles,
//!   and an AP is dropped from a tile when its best possible score anywhere in the
//!   tile is below the worst score some other AP is guaranteed to reach there;
//! * max-SIR, or any strategy with per-evaluation-point gains: every AP is scored at
//!   every pixel, with gains streamed row by row.

use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{
    argmax_first, argmax_sir, log_proximity, log_received, log_sir, AssociationStrategy, LinkTable,
};
use crate::error::{Error, Result};
use crate::fading::{fill_point_log_gains, GainFieldMode};
use crate::pointprocess::{Point, PointPattern, TierConfig, Window};
use crate::rng::StreamKey;

const TILE: usize = 16;

/// Serving AP of every pixel of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMap {
    pub window: Window,
    /// Row-major AP indices, `resolution^2` entries.
    pub grid: Vec<u32>,
    pub cell_pixel_counts: Vec<u64>,
}

impl AssociationMap {
    pub fn from_grid(window: Window, grid: Vec<u32>, aps: usize) -> Result<Self> {
        if grid.len() != window.pixel_count() {
            return Err(Error::Mismatch(format!(
                "grid has {} pixels, window needs {}",
                grid.len(),
                window.pixel_count()
            )));
        }
        let mut counts = vec![0u64; aps];
        for &ap in &grid {
            let slot = counts
                .get_mut(ap as usize)
                .ok_or_else(|| Error::Mismatch(format!("pixel assigned to AP {ap}, pattern has {aps}")))?;
            *slot += 1;
        }
        Ok(Self {
            window,
            grid,
            cell_pixel_counts: counts,
        })
    }

    pub fn pixel_area(&self) -> f64 {
        self.window.pixel_area()
    }

    pub fn serving_at(&self, p: Point) -> usize {
        self.grid[self.window.pixel_of(p)] as usize
    }

    /// Pixel count per tier.
    pub fn tier_pixel_counts(&self, pattern: &PointPattern, tiers: usize) -> Vec<u64> {
        let mut out = vec![0u64; tiers];
        for (ap, &count) in self.cell_pixel_counts.iter().enumerate() {
            out[pattern.tier_marks[ap]] += count;
        }
        out
    }
}

/// One association cell of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub ap_index: usize,
    pub tier: usize,
    pub area: f64,
    pub contains_origin: bool,
}

/// Rasterizes the association cells of `pattern`.
///
/// Per-evaluation-point gains are read from `key`'s streams; per-AP gains are the
/// pattern's gain marks.
pub fn compute_association_map(
    pattern: &PointPattern,
    tiers: &[TierConfig],
    strategy: AssociationStrategy,
    gain_mode: GainFieldMode,
    window: &Window,
    key: StreamKey,
) -> Result<AssociationMap> {
    window.validate()?;
    if pattern.is_empty() {
        return Err(Error::EmptyPattern { attempts: 0 });
    }
    let links = LinkTable::new(pattern, tiers)?;
    let res = window.resolution;
    let mut grid = vec![0u32; window.pixel_count()];

    let culled = match strategy {
        AssociationStrategy::Nearest => true,
        AssociationStrategy::MaxPower => gain_mode == GainFieldMode::PerAp,
        AssociationStrategy::MaxSir => false,
    };

    if culled {
        let (offsets, slopes): (Vec<f64>, Vec<f64>) = match strategy {
            AssociationStrategy::Nearest => (vec![0.0; pattern.len()], vec![0.5; pattern.len()]),
            _ => (
                links
                    .log_power
                    .iter()
                    .zip(&pattern.gain_marks)
                    .map(|(lp, g)| lp + g.ln())
                    .collect(),
                links.half_exponent.clone(),
            ),
        };
        let culler = TileCuller {
            window,
            points: &pattern.points,
            offsets: &offsets,
            slopes: &slopes,
        };
        grid.par_chunks_mut(res * TILE)
            .enumerate()
            .for_each(|(band, rows)| culler.fill_band(band * TILE, rows));
    } else {
        let dense = DenseScorer {
            window,
            pattern,
            tiers,
            links: &links,
            strategy,
            gain_mode,
            key,
        };
        grid.par_chunks_mut(res)
            .enumerate()
            .for_each_init(DenseScratch::default, |scratch, (row, cells)| {
                dense.fill_row(row, cells, scratch)
            });
    }

    AssociationMap::from_grid(*window, grid, pattern.len())
}

struct TileCuller<'a> {
    window: &'a Window,
    points: &'a [Point],
    offsets: &'a [f64],
    slopes: &'a [f64],
}

impl TileCuller<'_> {
    #[inline]
    fn score(&self, n: usize, d2: f64) -> f64 {
        if self.slopes[n] == 0.5 && self.offsets[n] == 0.0 {
            log_proximity(d2)
        } else {
            log_received(self.offsets[n], self.slopes[n], d2)
        }
    }

    fn fill_band(&self, first_row: usize, rows: &mut [u32]) {
        let res = self.window.resolution;
        let band_rows = rows.len() / res;
        let pixel = self.window.pixel_side();
        let mut candidates = Vec::new();
        let mut upper = Vec::with_capacity(self.points.len());

        for col0 in (0..res).step_by(TILE) {
            let cols = TILE.min(res - col0);
            // extents over pixel centers only
            let first = self.window.pixel_center(first_row, col0);
            let last = self.window.pixel_center(first_row + band_rows - 1, col0 + cols - 1);
            let center = Point::new(0.5 * (first.x + last.x), 0.5 * (first.y + last.y));
            let half_w = 0.5 * (cols - 1) as f64 * pixel;
            let half_h = 0.5 * (band_rows - 1) as f64 * pixel;

            upper.clear();
            let mut floor = f64::NEG_INFINITY;
            for (n, &p) in self.points.iter().enumerate() {
                let (dx, dy) = self.window.displacement(center, p);
                let (ax, ay) = (dx.abs(), dy.abs());
                let near_x = (ax - half_w).max(0.0);
                let near_y = (ay - half_h).max(0.0);
                let far2 = (ax + half_w).powi(2) + (ay + half_h).powi(2);
                let near2 = near_x * near_x + near_y * near_y;
                let hi = if near2 == 0.0 {
                    f64::INFINITY
                } else {
                    self.offsets[n] - self.slopes[n] * near2.ln()
                };
                let lo = self.offsets[n] - self.slopes[n] * far2.ln();
                floor = floor.max(lo);
                upper.push(hi);
            }
            let margin = 1e-9 * floor.abs().max(1.0);
            candidates.clear();
            candidates.extend((0..self.points.len()).filter(|&n| upper[n] >= floor - margin));

            for r in 0..band_rows {
                for c in col0..col0 + cols {
                    let y = self.window.pixel_center(first_row + r, c);
                    let mut best = candidates[0];
                    let mut best_score = self.score(best, self.window.dist2(y, self.points[best]));
                    for &n in &candidates[1..] {
                        let s = self.score(n, self.window.dist2(y, self.points[n]));
                        if s > best_score {
                            best = n;
                            best_score = s;
                        }
                    }
                    rows[r * res + c] = best as u32;
                }
            }
        }
    }
}

#[derive(Default)]
struct DenseScratch {
    gains: Vec<f64>,
    rx: Vec<f64>,
    sir: Vec<f64>,
}

struct DenseScorer<'a> {
    window: &'a Window,
    pattern: &'a PointPattern,
    tiers: &'a [TierConfig],
    links: &'a LinkTable,
    strategy: AssociationStrategy,
    gain_mode: GainFieldMode,
    key: StreamKey,
}

impl DenseScorer<'_> {
    fn fill_row(&self, row: usize, cells: &mut [u32], scratch: &mut DenseScratch) {
        let res = self.window.resolution;
        let aps = self.pattern.len();
        let per_point = self.gain_mode == GainFieldMode::PerEvaluationPoint;
        scratch.gains.resize(aps * if per_point { res } else { 1 }, 0.0);
        if per_point {
            for n in 0..aps {
                let model = &self.tiers[self.pattern.tier_marks[n]].fading;
                fill_point_log_gains(
                    model,
                    self.key,
                    n,
                    row * res,
                    &mut scratch.gains[n * res..(n + 1) * res],
                );
            }
        } else {
            for n in 0..aps {
                scratch.gains[n] = self.pattern.gain_marks[n].ln();
            }
        }

        for (col, cell) in cells.iter_mut().enumerate() {
            let y = self.window.pixel_center(row, col);
            scratch.rx.clear();
            for n in 0..aps {
                let g = if per_point {
                    scratch.gains[n * res + col]
                } else {
                    scratch.gains[n]
                };
                let d2 = self.window.dist2(y, self.pattern.points[n]);
                scratch.rx.push(log_received(
                    self.links.log_power[n] + g,
                    self.links.half_exponent[n],
                    d2,
                ));
            }
            *cell = match self.strategy {
                AssociationStrategy::MaxSir => {
                    log_sir(&scratch.rx, &mut scratch.sir);
                    argmax_sir(&scratch.sir, &scratch.rx)
                }
                _ => argmax_first(&scratch.rx),
            } as u32;
        }
    }
}

fn check_pair(map: &AssociationMap, pattern: &PointPattern) -> Result<()> {
    if map.cell_pixel_counts.len() != pattern.len() {
        return Err(Error::Mismatch(format!(
            "map covers {} APs, pattern has {}",
            map.cell_pixel_counts.len(),
            pattern.len()
        )));
    }
    Ok(())
}

/// One record per AP. `contains_origin` refers to the window center.
pub fn cell_areas(map: &AssociationMap, pattern: &PointPattern) -> Result<Vec<CellRecord>> {
    check_pair(map, pattern)?;
    let origin_ap = map.serving_at(map.window.center());
    let pixel_area = map.pixel_area();
    Ok(map
        .cell_pixel_counts
        .iter()
        .enumerate()
        .map(|(n, &count)| CellRecord {
            ap_index: n,
            tier: pattern.tier_marks[n],
            area: count as f64 * pixel_area,
            contains_origin: n == origin_ap,
        })
        .collect())
}

/// Cell of the pixel containing `point`.
pub fn zero_cell(map: &AssociationMap, pattern: &PointPattern, point: Point) -> Result<CellRecord> {
    check_pair(map, pattern)?;
    if !map.window.contains(point) {
        return Err(crate::error::invalid(
            "point",
            format!("({}, {}) lies outside the window", point.x, point.y),
        ));
    }
    let n = map.serving_at(point);
    Ok(CellRecord {
        ap_index: n,
        tier: pattern.tier_marks[n],
        area: map.cell_pixel_counts[n] as f64 * map.pixel_area(),
        contains_origin: true,
    })
}

/// Text raster: `width height side_length`, then one row of AP indices per line.
pub fn write_raster<W: Write>(map: &AssociationMap, mut out: W) -> io::Result<()> {
    let res = map.window.resolution;
    writeln!(out, "{res} {res} {}", map.window.side_length)?;
    let mut line = String::new();
    for row in map.grid.chunks(res) {
        line.clear();
        for (k, ap) in row.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&ap.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses a raster written by [`write_raster`].
pub fn read_raster<R: BufRead>(input: R, aps: usize) -> Result<AssociationMap> {
    let bad = |m: String| Error::Mismatch(format!("raster: {m}"));
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("missing header".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(bad(format!("header `{header}` needs 3 fields")));
    }
    let width: usize = fields[0].parse().map_err(|_| bad("width".into()))?;
    let height: usize = fields[1].parse().map_err(|_| bad("height".into()))?;
    let side: f64 = fields[2].parse().map_err(|_| bad("side_length".into()))?;
    if width != height {
        return Err(bad(format!("non-square raster {width}x{height}")));
    }
    let mut grid = Vec::with_capacity(width * height);
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        for tok in line.split_whitespace() {
            grid.push(tok.parse::<u32>().map_err(|_| bad(format!("bad index `{tok}`")))?);
        }
    }
    AssociationMap::from_grid(Window::new(side, width)?, grid, aps)
}
