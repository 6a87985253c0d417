//! Monte Carlo experiments and the Palm-calculus checks built on them.
//!
//! Confidence intervals are always computed across replications. Per-cell
//! quantities are pooled as ratio estimators (sum over replications of the
//! per-replication totals divided by the total cell count) with a delta-method
//! standard error, since cells of one replication are dependent.

use rand::RngCore;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::association::AssociationStrategy;
use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::fading::GainFieldMode;
use crate::pointprocess::{sample_network, Point, TierConfig, Window};
use crate::rng::{Purpose, StreamKey};
use crate::tessellation::{cell_areas, compute_association_map, zero_cell, AssociationMap, CellRecord};

/// Coverage of every reported confidence interval.
pub const CONFIDENCE: f64 = 0.95;
/// Cells larger than this fraction of the window are counted as truncation-prone.
pub const LARGE_CELL_FRACTION: f64 = 0.01;
pub const MIN_BIAS_REPLICATIONS: usize = 100;
pub const MIN_ZERO_SAMPLES: usize = 500;
pub const MIN_TYPICAL_SAMPLES: usize = 5000;

/// Point estimate with a two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
    pub half_width: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn undefined(samples: usize) -> Self {
        Self {
            mean: f64::NAN,
            standard_error: f64::NAN,
            half_width: f64::NAN,
            samples,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

fn t_quantile(samples: usize) -> f64 {
    let dof = (samples.saturating_sub(1)).max(1) as f64;
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + 0.5 * CONFIDENCE)
}

/// Sample mean with a Student-t interval.
pub fn mean_estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    if n < 2 {
        return Estimate {
            mean: values.first().copied().unwrap_or(f64::NAN),
            ..Estimate::undefined(n)
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    Estimate {
        mean,
        standard_error: se,
        half_width: t_quantile(n) * se,
        samples: n,
    }
}

/// `sum(numerators) / sum(denominators)` with a delta-method interval over replications.
pub fn ratio_estimate(numerators: &[f64], denominators: &[f64]) -> Estimate {
    let n = numerators.len();
    let den: f64 = denominators.iter().sum();
    if n < 2 || den == 0.0 {
        return Estimate::undefined(n);
    }
    let ratio = numerators.iter().sum::<f64>() / den;
    let resid = numerators
        .iter()
        .zip(denominators)
        .map(|(a, b)| (a - ratio * b).powi(2))
        .sum::<f64>();
    let mean_den = den / n as f64;
    let se = (resid / (n as f64 * (n - 1) as f64)).sqrt() / mean_den;
    Estimate {
        mean: ratio,
        standard_error: se,
        half_width: t_quantile(n) * se,
        samples: n,
    }
}

/// Per-tier totals of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierTotals {
    pub cells: u64,
    pub area: f64,
    pub area_squared: f64,
    pub pixels: u64,
    pub large_cells: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replication: u64,
    pub tiers: Vec<TierTotals>,
    pub zero_cell: CellRecord,
    /// All cells, kept on request.
    pub cells: Option<Vec<CellRecord>>,
    /// Kept for the first few replications on request.
    pub map: Option<AssociationMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierStatistics {
    pub tier: usize,
    pub typical_mean_area: Estimate,
    pub typical_second_moment: Estimate,
    /// `E^o[A^2] / E^o[A]`, the area-biased mean predicted for the zero cell.
    pub biased_mean_prediction: Estimate,
    /// Mean area of the zero cell given that it belongs to this tier.
    pub zero_cell_mean_area: Estimate,
    pub empirical_assoc_prob: Estimate,
    pub cells_observed: u64,
    pub large_cell_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaStatistics {
    pub tiers: Vec<TierStatistics>,
    pub replications: usize,
    pub total_cells: u64,
    pub window_area: f64,
}

/// Everything needed to run replications, in internal (linear) units.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub tiers: Vec<TierConfig>,
    pub window: Window,
    pub strategy: AssociationStrategy,
    pub gain_mode: GainFieldMode,
    pub replications: usize,
    pub master_seed: u64,
    /// Reference point of the zero cell; window center when absent.
    pub zero_point: Option<Point>,
    pub keep_cells: bool,
    /// Number of leading replications whose maps are kept.
    pub keep_maps: usize,
}

impl ExperimentPlan {
    pub fn new(tiers: Vec<TierConfig>, window: Window, replications: usize, master_seed: u64) -> Self {
        Self {
            tiers,
            window,
            strategy: AssociationStrategy::MaxPower,
            gain_mode: GainFieldMode::PerAp,
            replications,
            master_seed,
            zero_point: None,
            keep_cells: false,
            keep_maps: 0,
        }
    }

    pub fn with_strategy(mut self, strategy: AssociationStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_gain_mode(mut self, mode: GainFieldMode) -> Self {
        self.gain_mode = mode;
        self
    }

    pub fn keeping_cells(mut self) -> Self {
        self.keep_cells = true;
        self
    }

    pub fn run_replication(&self, replication: u64) -> Result<ReplicationOutcome> {
        let key = StreamKey::new(self.master_seed, replication);
        let pattern = sample_network(&self.tiers, &self.window, key)?;
        let map = compute_association_map(&pattern, &self.tiers, self.strategy, self.gain_mode, &self.window, key)?;
        let cells = cell_areas(&map, &pattern)?;
        let zero = zero_cell(&map, &pattern, self.zero_point.unwrap_or(self.window.center()))?;
        let large = LARGE_CELL_FRACTION * self.window.area();

        let mut tiers = vec![
            TierTotals {
                cells: 0,
                area: 0.0,
                area_squared: 0.0,
                pixels: 0,
                large_cells: 0,
            };
            self.tiers.len()
        ];
        for (cell, &pixels) in cells.iter().zip(&map.cell_pixel_counts) {
            let t = &mut tiers[cell.tier];
            t.cells += 1;
            t.area += cell.area;
            t.area_squared += cell.area * cell.area;
            t.pixels += pixels;
            t.large_cells += u64::from(cell.area > large);
        }
        Ok(ReplicationOutcome {
            replication,
            tiers,
            zero_cell: zero,
            cells: self.keep_cells.then_some(cells),
            map: ((replication as usize) < self.keep_maps).then_some(map),
        })
    }

    pub fn run(&self) -> Result<Experiment> {
        if self.replications < 2 {
            return Err(Error::InsufficientSamples {
                what: "replications",
                needed: 2,
                got: self.replications,
            });
        }
        crate::pointprocess::validate_tiers(&self.tiers)?;
        self.window.validate()?;
        // ordered collect: aggregation never depends on completion order
        let outcomes = (0..self.replications as u64)
            .into_par_iter()
            .map(|r| self.run_replication(r))
            .collect::<Result<Vec<_>>>()?;
        let statistics = summarize(&outcomes, self.tiers.len(), self.window.area());
        Ok(Experiment {
            statistics,
            replications: outcomes,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub statistics: AreaStatistics,
    pub replications: Vec<ReplicationOutcome>,
}

impl Experiment {
    /// Zero-cell areas of the replications whose zero cell belongs to `tier`.
    pub fn zero_cell_areas(&self, tier: usize) -> Vec<f64> {
        self.replications
            .iter()
            .filter(|r| r.zero_cell.tier == tier)
            .map(|r| r.zero_cell.area)
            .collect()
    }

    /// Areas of all kept cells of `tier` (empty unless cells were kept).
    pub fn typical_cell_areas(&self, tier: usize) -> Vec<f64> {
        self.replications
            .iter()
            .filter_map(|r| r.cells.as_ref())
            .flatten()
            .filter(|c| c.tier == tier)
            .map(|c| c.area)
            .collect()
    }
}

pub fn run_experiment(config: &SimulationConfig) -> Result<Experiment> {
    config.plan()?.run()
}

pub fn summarize(outcomes: &[ReplicationOutcome], tiers: usize, window_area: f64) -> AreaStatistics {
    let total_cells = outcomes.iter().flat_map(|o| o.tiers.iter().map(|t| t.cells)).sum();
    let per_tier = (0..tiers)
        .map(|i| {
            let column =
                |f: &dyn Fn(&TierTotals) -> f64| -> Vec<f64> { outcomes.iter().map(|o| f(&o.tiers[i])).collect() };
            let counts = column(&|t| t.cells as f64);
            let areas = column(&|t| t.area);
            let squares = column(&|t| t.area_squared);
            let fractions: Vec<f64> = column(&|t| t.area / window_area);
            let zero: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.zero_cell.tier == i)
                .map(|o| o.zero_cell.area)
                .collect();
            let cells: u64 = outcomes.iter().map(|o| o.tiers[i].cells).sum();
            let large: u64 = outcomes.iter().map(|o| o.tiers[i].large_cells).sum();
            TierStatistics {
                tier: i,
                typical_mean_area: ratio_estimate(&areas, &counts),
                typical_second_moment: ratio_estimate(&squares, &counts),
                biased_mean_prediction: ratio_estimate(&squares, &areas),
                zero_cell_mean_area: mean_estimate(&zero),
                empirical_assoc_prob: mean_estimate(&fractions),
                cells_observed: cells,
                large_cell_fraction: if cells == 0 { 0.0 } else { large as f64 / cells as f64 },
            }
        })
        .collect();
    AreaStatistics {
        tiers: per_tier,
        replications: outcomes.len(),
        total_cells,
        window_area,
    }
}

/// Zero-cell mean against `E^o[A^2] / E^o[A]` for one tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaBiasReport {
    pub tier: usize,
    pub zero_cell_mean: Estimate,
    pub predicted: Estimate,
    pub relative_difference: f64,
    pub z_score: f64,
    pub p_value: f64,
    pub significance: f64,
    pub passed: bool,
}

/// Two-sided normal test of a difference; a zero difference always passes.
pub fn two_sided_z(diff: f64, se: f64) -> (f64, f64) {
    if diff == 0.0 {
        return (0.0, 1.0);
    }
    if !(se > 0.0) {
        return (f64::INFINITY.copysign(diff), 0.0);
    }
    let z = diff / se;
    let normal = Normal::standard();
    (z, 2.0 * (1.0 - normal.cdf(z.abs())))
}

/// Tests `E[|C(kappa(0))| | tier i] = E^o_i[A^2] / E^o_i[A]`.
pub fn area_bias_check(stats: &AreaStatistics, tier: usize, significance: f64) -> Result<AreaBiasReport> {
    compare_zero_cell(stats, tier, significance, false)
}

/// Negative control: compares the zero cell with the plain typical mean instead.
pub fn unbiased_mean_check(stats: &AreaStatistics, tier: usize, significance: f64) -> Result<AreaBiasReport> {
    compare_zero_cell(stats, tier, significance, true)
}

fn compare_zero_cell(
    stats: &AreaStatistics,
    tier: usize,
    significance: f64,
    plain_mean: bool,
) -> Result<AreaBiasReport> {
    if stats.replications < MIN_BIAS_REPLICATIONS {
        return Err(Error::InsufficientSamples {
            what: "replications for the area-bias check",
            needed: MIN_BIAS_REPLICATIONS,
            got: stats.replications,
        });
    }
    let t = stats
        .tiers
        .get(tier)
        .ok_or_else(|| Error::Mismatch(format!("no tier {tier} in statistics")))?;
    let predicted = if plain_mean {
        t.typical_mean_area
    } else {
        t.biased_mean_prediction
    };
    let zero = t.zero_cell_mean_area;
    if zero.samples < 2 {
        return Err(Error::InsufficientSamples {
            what: "zero-cell samples in tier",
            needed: 2,
            got: zero.samples,
        });
    }
    let diff = zero.mean - predicted.mean;
    let se = (zero.standard_error.powi(2) + predicted.standard_error.powi(2)).sqrt();
    let (z, p) = two_sided_z(diff, se);
    Ok(AreaBiasReport {
        tier,
        zero_cell_mean: zero,
        predicted,
        relative_difference: if diff == 0.0 {
            0.0
        } else {
            diff.abs() / predicted.mean.abs()
        },
        z_score: z,
        p_value: p,
        significance,
        passed: p >= significance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Typical cells resampled with probability proportional to area.
    AreaBiased,
    /// Typical cells resampled uniformly (wrong on purpose).
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub weighting: Weighting,
    pub statistic: f64,
    pub p_value: f64,
    pub zero_samples: usize,
    pub resampled: usize,
    pub significance: f64,
    pub passed: bool,
}

/// Two-sample Kolmogorov-Smirnov test of zero-cell areas against typical cells
/// resampled with the given weighting.
pub fn distribution_bias_check(
    zero_samples: &[f64],
    typical_samples: &[f64],
    weighting: Weighting,
    seed: u64,
    significance: f64,
) -> Result<DistributionReport> {
    if zero_samples.len() < MIN_ZERO_SAMPLES {
        return Err(Error::InsufficientSamples {
            what: "zero-cell samples",
            needed: MIN_ZERO_SAMPLES,
            got: zero_samples.len(),
        });
    }
    if typical_samples.len() < MIN_TYPICAL_SAMPLES {
        return Err(Error::InsufficientSamples {
            what: "typical-cell samples",
            needed: MIN_TYPICAL_SAMPLES,
            got: typical_samples.len(),
        });
    }
    let resampled = resample(typical_samples, weighting, seed)?;
    let (statistic, p_value) = ks_two_sample(zero_samples, &resampled);
    Ok(DistributionReport {
        weighting,
        statistic,
        p_value,
        zero_samples: zero_samples.len(),
        resampled: resampled.len(),
        significance,
        passed: p_value >= significance,
    })
}

fn resample(values: &[f64], weighting: Weighting, seed: u64) -> Result<Vec<f64>> {
    let mut rng = StreamKey::new(seed, 0).stream(Purpose::Resampling, 0);
    let n = values.len();
    match weighting {
        Weighting::AreaBiased => {
            let table = WeightedAliasIndex::new(values.to_vec())
                .map_err(|e| Error::Mismatch(format!("cannot weight by area: {e}")))?;
            Ok((0..n).map(|_| values[table.sample(&mut rng)]).collect())
        }
        Weighting::Unweighted => Ok((0..n).map(|_| values[(rng.next_u64() % n as u64) as usize]).collect()),
    }
}

/// Two-sample KS statistic and asymptotic p-value (Stephens' small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    (d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
