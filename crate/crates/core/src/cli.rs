//! Subcommand implementations behind the `hetnet-cells` binary.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::analytics::{self, AnalyticPrediction};
use crate::association::AssociationStrategy;
use crate::config::{SimulationConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::oracles::brute_force_map;
use crate::output::{self, AnalyzeRow, CheckRow, SummaryRow, SweepRow};
use crate::pointprocess::sample_network;
use crate::rng::StreamKey;
use crate::stats::{
    self, area_bias_check, distribution_bias_check, two_sided_z, unbiased_mean_check, Experiment, Weighting,
};
use crate::tessellation::{compute_association_map, write_raster};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CELLS_FILE: &str = "cells.csv";
pub const ANALYZE_FILE: &str = "analyze.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const CONFIG_ECHO_FILE: &str = "config.json";

/// Replications cross-checked against the brute-force oracle under `--oracle`.
const ORACLE_REPLICATIONS: usize = 3;
/// Replications compared map-for-map between max power and max SIR in `validate`.
const EQUIVALENCE_REPLICATIONS: usize = 5;
const QUADRATURE_AGREEMENT: f64 = 1e-6;
const PARTITION_TOLERANCE: f64 = 1e-4;

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut SimulationConfig) -> Result<()> {
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(r) = self.replications {
            config.replications = r;
        }
        if let Some(dir) = &self.out {
            config.output.directory = Some(dir.display().to_string());
        }
        config.validate()
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<SimulationConfig> {
    let mut config = SimulationConfig::from_file(path)?;
    overrides.apply(&mut config)?;
    Ok(config)
}

fn out_dir(config: &SimulationConfig) -> PathBuf {
    PathBuf::from(config.output.directory.as_deref().unwrap_or("."))
}

fn io_error(path: &Path, e: impl ToString) -> Error {
    Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn echo_config(config: &SimulationConfig, dir: &Path) -> Result<()> {
    let path = dir.join(CONFIG_ECHO_FILE);
    fs::write(&path, config.to_json_pretty() + "\n").map_err(|e| io_error(&path, e))
}

fn write_csv<R: serde::Serialize>(config: &SimulationConfig, path: &Path, rows: &[R]) -> Result<()> {
    output::write_rows(create(path)?, rows, config.master_seed, &config.hash()).map_err(|e| io_error(path, e))
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub experiment: Experiment,
    pub prediction: Option<AnalyticPrediction>,
    pub files: Vec<PathBuf>,
}

/// Runs the experiment and writes the summary, raw cells and rasters.
pub fn cmd_simulate(config: &SimulationConfig, oracle: bool) -> Result<SimulateOutcome> {
    config.validate()?;
    let experiment = stats::run_experiment(config)?;
    if oracle {
        oracle_cross_check(config)?;
    }
    // analytic rows are a convenience; a failing formula must not hide the simulation
    let prediction = analytics::predict(&config.tier_configs()).ok();

    let dir = out_dir(config);
    prepare_dir(&dir)?;
    let hash = config.hash();
    let mut files = Vec::new();

    let rows: Vec<SummaryRow> = output::summary_rows(
        &config.experiment_id,
        &experiment.statistics,
        prediction.as_ref(),
        config.master_seed,
    );
    let path = dir.join(SUMMARY_FILE);
    write_csv(config, &path, &rows)?;
    files.push(path);

    if config.output.raw_cells {
        let path = dir.join(CELLS_FILE);
        output::write_raw_cells(create(&path)?, &experiment.replications, config.master_seed, &hash)
            .map_err(|e| io_error(&path, e))?;
        files.push(path);
    }
    for rep in &experiment.replications {
        if let Some(map) = &rep.map {
            let path = dir.join(format!("raster_{:04}.txt", rep.replication));
            let mut w = create(&path)?;
            use std::io::Write;
            writeln!(w, "{}", output::provenance_line(config.master_seed, &hash))
                .and_then(|_| write_raster(map, &mut w))
                .map_err(|e| io_error(&path, e))?;
            files.push(path);
        }
    }
    echo_config(config, &dir)?;
    files.push(dir.join(CONFIG_ECHO_FILE));
    Ok(SimulateOutcome {
        experiment,
        prediction,
        files,
    })
}

fn oracle_cross_check(config: &SimulationConfig) -> Result<()> {
    let tiers = config.tier_configs();
    for r in 0..config.replications.min(ORACLE_REPLICATIONS) as u64 {
        let key = StreamKey::new(config.master_seed, r);
        let pattern = sample_network(&tiers, &config.window, key)?;
        let main = compute_association_map(&pattern, &tiers, config.strategy, config.gain_mode, &config.window, key)?;
        let slow = brute_force_map(&pattern, &tiers, config.strategy, config.gain_mode, &config.window, key)?;
        if let Some(px) = main.grid.iter().zip(&slow.grid).position(|(a, b)| a != b) {
            return Err(Error::Mismatch(format!(
                "replication {r}: pixel {px} served by AP {} but the oracle says {}",
                main.grid[px], slow.grid[px]
            )));
        }
    }
    Ok(())
}

pub fn analyze_rows(config: &SimulationConfig, prediction: &AnalyticPrediction) -> Vec<AnalyzeRow> {
    config
        .tier_configs()
        .iter()
        .enumerate()
        .map(|(i, t)| AnalyzeRow {
            experiment_id: config.experiment_id.clone(),
            tier: i + 1,
            density: t.density,
            power_w: t.power,
            path_loss_exponent: t.path_loss_exponent,
            transformed_density: prediction.transformed_densities[i],
            assoc_prob: prediction.per_tier_assoc_prob[i],
            mean_area: prediction.per_tier_mean_area[i],
            mean_area_closed_form: prediction.closed_form_mean_area.as_ref().map(|v| v[i]),
            mean_area_quadrature: prediction.quadrature_mean_area[i].value,
            quadrature_error: prediction.quadrature_mean_area[i].error,
        })
        .collect()
}

/// Evaluates the formulas and writes one row per tier.
pub fn cmd_analyze(config: &SimulationConfig) -> Result<AnalyticPrediction> {
    config.validate()?;
    let prediction = analytics::predict(&config.tier_configs())?;
    let dir = out_dir(config);
    prepare_dir(&dir)?;
    write_csv(config, &dir.join(ANALYZE_FILE), &analyze_rows(config, &prediction))?;
    echo_config(config, &dir)?;
    Ok(prediction)
}

/// Analytic and (optionally) Monte Carlo rows for every sweep point, without writing.
pub fn sweep_rows(config: &SimulationConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let sweep = config.sweep.as_ref().ok_or_else(|| Error::Config {
        path: "sweep".into(),
        reason: "the sweep command needs a `sweep` section".into(),
    })?;
    let axis = sweep.axis();
    let series: Vec<Option<(SweepAxis, f64)>> = match &sweep.series {
        None => vec![None],
        Some(s) => s.values.iter().map(|&v| Some((s.clone(), v))).collect(),
    };
    let mut rows = Vec::new();
    for point in &series {
        for &value in &axis.values {
            let mut c = config.clone();
            c.sweep = None;
            if let Some((s, v)) = point {
                c.apply(s.parameter, s.tier, *v);
            }
            c.apply(axis.parameter, axis.tier, value);
            c.validate()?;
            let row = |tier: usize,
                       method: &'static str,
                       mean_area: f64,
                       ci: Option<f64>,
                       assoc: f64,
                       assoc_ci: Option<f64>,
                       reps: Option<usize>| SweepRow {
                experiment_id: config.experiment_id.clone(),
                parameter: axis.parameter.name(),
                parameter_tier: axis.tier,
                value,
                series_parameter: point.as_ref().map(|(s, _)| s.parameter.name()),
                series_tier: point.as_ref().map(|(s, _)| s.tier),
                series_value: point.as_ref().map(|(_, v)| *v),
                tier: tier + 1,
                method,
                mean_area,
                ci_half_width: ci,
                assoc_prob: assoc,
                assoc_prob_ci_half_width: assoc_ci,
                reps,
                seed: config.master_seed,
            };
            let prediction = analytics::predict(&c.tier_configs())?;
            for i in 0..c.tiers.len() {
                rows.push(row(
                    i,
                    "analytic",
                    prediction.per_tier_mean_area[i],
                    None,
                    prediction.per_tier_assoc_prob[i],
                    None,
                    None,
                ));
            }
            if sweep.monte_carlo {
                let exp = stats::run_experiment(&c)?;
                for t in &exp.statistics.tiers {
                    rows.push(row(
                        t.tier,
                        "montecarlo",
                        t.typical_mean_area.mean,
                        Some(t.typical_mean_area.half_width),
                        t.empirical_assoc_prob.mean,
                        Some(t.empirical_assoc_prob.half_width),
                        Some(exp.statistics.replications),
                    ));
                }
            }
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(config: &SimulationConfig) -> Result<Vec<SweepRow>> {
    let rows = sweep_rows(config)?;
    let dir = out_dir(config);
    prepare_dir(&dir)?;
    write_csv(config, &dir.join(SWEEP_FILE), &rows)?;
    echo_config(config, &dir)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckRow>,
    pub negative_control: bool,
}

impl ValidationReport {
    /// True when every check that ran passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.skipped)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = if c.skipped {
                "SKIP"
            } else if c.passed {
                "PASS"
            } else {
                "FAIL"
            };
            let tier = c.tier.map(|t| format!(" tier {t}")).unwrap_or_default();
            s.push_str(&format!("{status} {}{tier}: {}\n", c.check, c.detail));
        }
        s.push_str(if self.passed() {
            "all checks passed\n"
        } else {
            "validation failed\n"
        });
        s
    }
}

fn check(name: &str, tier: Option<usize>, passed: bool, value: f64, reference: f64, detail: String) -> CheckRow {
    CheckRow {
        check: name.to_string(),
        tier,
        passed,
        skipped: false,
        value: Some(value),
        reference: Some(reference),
        detail,
    }
}

fn skipped(name: &str, tier: Option<usize>, reason: String) -> CheckRow {
    CheckRow {
        check: name.to_string(),
        tier,
        passed: false,
        skipped: true,
        value: None,
        reference: None,
        detail: reason,
    }
}

/// Runs the identity checks on `config` and writes `validation.csv`.
///
/// With `negative_control`, the zero-cell checks compare against the
/// unweighted typical cell, which should make them fail.
pub fn cmd_validate(config: &SimulationConfig, negative_control: bool) -> Result<ValidationReport> {
    let report = validation_checks(config, negative_control)?;
    let dir = out_dir(config);
    prepare_dir(&dir)?;
    write_csv(config, &dir.join(VALIDATION_FILE), &report.checks)?;
    echo_config(config, &dir)?;
    Ok(report)
}

pub fn validation_checks(config: &SimulationConfig, negative_control: bool) -> Result<ValidationReport> {
    config.validate()?;
    let alpha = config.significance;
    let tiers = config.tier_configs();
    let mut plan = config.plan()?;
    plan.keep_cells = true;
    plan.keep_maps = 0;
    let exp = plan.run()?;
    let stats = &exp.statistics;
    let prediction = analytics::predict(&tiers)?;
    let mut checks = Vec::new();

    let total: f64 = stats.tiers.iter().map(|t| t.empirical_assoc_prob.mean).sum();
    checks.push(check(
        "association_partition",
        None,
        (total - 1.0).abs() < PARTITION_TOLERANCE,
        total,
        1.0,
        format!("sum of tier area fractions = {total:.12}"),
    ));

    for t in &stats.tiers {
        let i = t.tier;
        let expected = prediction.per_tier_assoc_prob[i];
        let est = t.empirical_assoc_prob;
        let (z, p) = two_sided_z(est.mean - expected, est.standard_error);
        checks.push(check(
            "association_probability",
            Some(i + 1),
            p >= alpha,
            est.mean,
            expected,
            format!(
                "empirical {:.6} +/- {:.6} vs density x mean area {expected:.6} (z = {z:.2}, p = {p:.3})",
                est.mean, est.half_width
            ),
        ));

        let expected = prediction.per_tier_mean_area[i];
        let est = t.typical_mean_area;
        let (z, p) = two_sided_z(est.mean - expected, est.standard_error);
        checks.push(check(
            "mean_area",
            Some(i + 1),
            p >= alpha,
            est.mean,
            expected,
            format!("typical mean {:.6} +/- {:.6} vs analytic {expected:.6} (z = {z:.2}, p = {p:.3}; {:.2}% of cells > 1% of window)", est.mean, est.half_width, 100.0 * t.large_cell_fraction),
        ));
    }

    if let Some(closed) = &prediction.closed_form_mean_area {
        for (i, (c, q)) in closed.iter().zip(&prediction.quadrature_mean_area).enumerate() {
            let rel = (q.value - c).abs() / c;
            checks.push(check(
                "quadrature_vs_closed_form",
                Some(i + 1),
                rel < QUADRATURE_AGREEMENT,
                q.value,
                *c,
                format!("relative difference {rel:.2e}"),
            ));
        }
    } else {
        checks.push(skipped(
            "quadrature_vs_closed_form",
            None,
            "path-loss exponents differ; no closed form".into(),
        ));
    }

    let reps = config.replications.min(EQUIVALENCE_REPLICATIONS);
    let mut identical = 0;
    for r in 0..reps as u64 {
        let key = StreamKey::new(config.master_seed, r);
        let pattern = sample_network(&tiers, &config.window, key)?;
        let maps = [AssociationStrategy::MaxPower, AssociationStrategy::MaxSir]
            .map(|s| compute_association_map(&pattern, &tiers, s, config.gain_mode, &config.window, key));
        let [a, b] = maps;
        identical += usize::from(a?.grid == b?.grid);
    }
    checks.push(check(
        "strategy_equivalence",
        None,
        identical == reps,
        identical as f64,
        reps as f64,
        format!("{identical} of {reps} max-power and max-SIR maps identical"),
    ));

    let (moment_name, dist_name, weighting) = if negative_control {
        (
            "zero_cell_mean_unweighted",
            "zero_cell_distribution_unweighted",
            Weighting::Unweighted,
        )
    } else {
        ("zero_cell_mean", "zero_cell_distribution", Weighting::AreaBiased)
    };
    let mut corrupted_ran = false;
    for i in 0..tiers.len() {
        let report = if negative_control {
            unbiased_mean_check(stats, i, alpha)
        } else {
            area_bias_check(stats, i, alpha)
        };
        match report {
            Ok(r) => {
                corrupted_ran = true;
                checks.push(check(
                    moment_name,
                    Some(i + 1),
                    r.passed,
                    r.zero_cell_mean.mean,
                    r.predicted.mean,
                    format!(
                        "zero cell {:.5} +/- {:.5} vs predicted {:.5} +/- {:.5} (z = {:.2}, p = {:.3})",
                        r.zero_cell_mean.mean,
                        r.zero_cell_mean.half_width,
                        r.predicted.mean,
                        r.predicted.half_width,
                        r.z_score,
                        r.p_value
                    ),
                ))
            }
            Err(e @ Error::InsufficientSamples { .. }) => checks.push(skipped(moment_name, Some(i + 1), e.to_string())),
            Err(e) => return Err(e),
        }
        let zero = exp.zero_cell_areas(i);
        let typical = exp.typical_cell_areas(i);
        match distribution_bias_check(&zero, &typical, weighting, config.master_seed, alpha) {
            Ok(r) => {
                corrupted_ran = true;
                checks.push(check(
                    dist_name,
                    Some(i + 1),
                    r.passed,
                    r.statistic,
                    0.0,
                    format!(
                        "KS D = {:.4}, p = {:.4}, {} zero cells",
                        r.statistic, r.p_value, r.zero_samples
                    ),
                ))
            }
            Err(e @ Error::InsufficientSamples { .. }) => checks.push(skipped(dist_name, Some(i + 1), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    if negative_control && !corrupted_ran {
        checks.push(CheckRow {
            check: "negative_control".into(),
            tier: None,
            passed: false,
            skipped: false,
            value: None,
            reference: None,
            detail: "too few replications to run any zero-cell check".into(),
        });
    }
    Ok(ValidationReport {
        checks,
        negative_control,
    })
}
