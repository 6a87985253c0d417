//! JSON experiment configuration.
//!
//! Powers are given in dBm here and converted to watts before anything else
//! sees them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics;
use crate::association::AssociationStrategy;
use crate::error::{Error, Result};
use crate::fading::{FadingModel, GainFieldMode};
use crate::pointprocess::{Point, TierConfig, Window};
use crate::stats::ExperimentPlan;

pub const DEFAULT_REPLICATIONS: usize = 20;
pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;
/// Below this many pixels per mean cell a warning is printed.
pub const MIN_PIXELS_PER_CELL: f64 = 10.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierSpec {
    pub power_dbm: f64,
    pub density: f64,
    pub path_loss_exponent: f64,
    #[serde(default)]
    pub fading: FadingModel,
}

impl TierSpec {
    pub fn to_tier(&self) -> TierConfig {
        TierConfig::new(
            self.density,
            dbm_to_watts(self.power_dbm),
            self.path_loss_exponent,
            self.fading,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Also write every cell of every replication.
    #[serde(default)]
    pub raw_cells: bool,
    /// Number of leading replications whose association rasters are written.
    #[serde(default)]
    pub raster_dumps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Density,
    Sigma,
    PathLossExponent,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Density => "density",
            Self::Sigma => "sigma",
            Self::PathLossExponent => "path_loss_exponent",
        }
    }
}

/// One swept tier parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    /// One-based tier number.
    pub tier: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    /// One-based tier number.
    pub tier: usize,
    pub values: Vec<f64>,
    /// Optional second axis; every combination is run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SweepAxis>,
    #[serde(default = "yes")]
    pub monte_carlo: bool,
}

fn yes() -> bool {
    true
}

impl SweepConfig {
    pub fn axis(&self) -> SweepAxis {
        SweepAxis {
            parameter: self.parameter,
            tier: self.tier,
            values: self.values.clone(),
        }
    }
}

fn default_experiment_id() -> String {
    "experiment".to_string()
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_significance() -> f64 {
    DEFAULT_SIGNIFICANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_experiment_id")]
    pub experiment_id: String,
    pub window: Window,
    pub tiers: Vec<TierSpec>,
    #[serde(default)]
    pub strategy: AssociationStrategy,
    #[serde(default)]
    pub gain_mode: GainFieldMode,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_significance")]
    pub significance: f64,
    /// Reference point for the zero cell; the window center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_cell_point: Option<Point>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn config_error(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        reason: reason.into(),
    }
}

impl SimulationConfig {
    /// A single-tier, no-fading config.
    pub fn single_tier(density: f64, window: Window) -> Self {
        Self {
            experiment_id: default_experiment_id(),
            window,
            tiers: vec![TierSpec {
                power_dbm: 30.0,
                density,
                path_loss_exponent: 4.0,
                fading: FadingModel::Deterministic,
            }],
            strategy: AssociationStrategy::MaxPower,
            gain_mode: GainFieldMode::PerAp,
            replications: DEFAULT_REPLICATIONS,
            master_seed: 0,
            significance: DEFAULT_SIGNIFICANCE,
            zero_cell_point: None,
            output: OutputConfig::default(),
            sweep: None,
        }
    }

    /// Parses and validates a JSON document.
    ///
    /// Syntax and schema errors report `line L, column C`; semantic errors
    /// report the offending field path.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| config_error(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config { path: at, reason } => config_error(format!("{}: {at}", path.display()), reason),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form, ignoring
    /// the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.directory = None;
        let compact = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(compact.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(config_error("tiers", "at least one tier is required"));
        }
        self.window
            .validate()
            .map_err(|e| config_error("window", e.to_string()))?;
        for (i, t) in self.tiers.iter().enumerate() {
            if !t.power_dbm.is_finite() {
                return Err(config_error(format!("tiers[{i}].power_dbm"), "must be finite"));
            }
            t.to_tier().validate().map_err(|e| match e {
                Error::InvalidParameter { name, reason } => {
                    let field = if matches!(name, "sigma" | "scale") {
                        format!("tiers[{i}].fading.{name}")
                    } else {
                        format!("tiers[{i}].{name}")
                    };
                    config_error(field, reason)
                }
                other => config_error(format!("tiers[{i}]"), other.to_string()),
            })?;
        }
        if self.replications < 2 {
            return Err(config_error("replications", "at least 2 replications are required"));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(config_error("significance", "must lie in (0, 1)"));
        }
        if let Some(p) = self.zero_cell_point {
            if !self.window.contains(p) {
                return Err(config_error("zero_cell_point", "outside the window"));
            }
        }
        if let Some(sweep) = &self.sweep {
            self.check_axis(&sweep.axis(), "sweep")?;
            if let Some(series) = &sweep.series {
                self.check_axis(series, "sweep.series")?;
            }
        }
        Ok(())
    }

    fn check_axis(&self, axis: &SweepAxis, at: &str) -> Result<()> {
        if axis.tier == 0 || axis.tier > self.tiers.len() {
            return Err(config_error(
                format!("{at}.tier"),
                format!("tier {} is not in 1..={}", axis.tier, self.tiers.len()),
            ));
        }
        if axis.values.is_empty() {
            return Err(config_error(format!("{at}.values"), "no sweep values"));
        }
        if axis.parameter == SweepParameter::Sigma
            && matches!(self.tiers[axis.tier - 1].fading, FadingModel::Exponential { .. })
        {
            return Err(config_error(
                format!("{at}.parameter"),
                "sigma sweeps need a lognormal or deterministic tier",
            ));
        }
        for (j, &v) in axis.values.iter().enumerate() {
            let mut probe = self.clone();
            probe.sweep = None;
            probe.apply(axis.parameter, axis.tier, v);
            probe
                .validate()
                .map_err(|e| config_error(format!("{at}.values[{j}]"), e.to_string()))?;
        }
        Ok(())
    }

    /// Sets one tier parameter (tier is one-based).
    pub fn apply(&mut self, parameter: SweepParameter, tier: usize, value: f64) {
        let t = &mut self.tiers[tier - 1];
        match parameter {
            SweepParameter::Density => t.density = value,
            SweepParameter::PathLossExponent => t.path_loss_exponent = value,
            SweepParameter::Sigma => {
                t.fading = if value == 0.0 {
                    FadingModel::Deterministic
                } else {
                    FadingModel::LogNormal { sigma: value }
                }
            }
        }
    }

    pub fn tier_configs(&self) -> Vec<TierConfig> {
        self.tiers.iter().map(TierSpec::to_tier).collect()
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        self.validate()?;
        Ok(ExperimentPlan {
            tiers: self.tier_configs(),
            window: self.window,
            strategy: self.strategy,
            gain_mode: self.gain_mode,
            replications: self.replications,
            master_seed: self.master_seed,
            zero_point: self.zero_cell_point,
            keep_cells: self.output.raw_cells,
            keep_maps: self.output.raster_dumps,
        })
    }

    /// Non-fatal problems worth reporting before a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(areas) = analytics::mean_areas(&self.tier_configs()) {
            for (i, a) in areas.iter().enumerate() {
                if self.window.area() < 100.0 * a {
                    out.push(format!(
                        "window area {:.3} is less than 100 mean cells of tier {} ({a:.3} each); \
                         torus truncation may bias areas",
                        self.window.area(),
                        i + 1
                    ));
                }
            }
        }
        let pixels_per_cell = analytics::mean_areas(&self.tier_configs())
            .map(|a| a.iter().cloned().fold(f64::INFINITY, f64::min) / self.window.pixel_area())
            .unwrap_or(f64::INFINITY);
        if pixels_per_cell < MIN_PIXELS_PER_CELL {
            out.push(format!(
                "only {pixels_per_cell:.1} pixels per mean cell; per-cell areas are coarse"
            ));
        }
        out
    }
}
