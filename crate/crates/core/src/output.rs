//! CSV writers. Every file starts with a `# master_seed=... config_hash=...` line.
//!
//! Tier numbers are one-based in all outputs.

use std::io::{self, Write};

use serde::Serialize;

use crate::analytics::AnalyticPrediction;
use crate::stats::{AreaStatistics, ReplicationOutcome};
use crate::tessellation::CellRecord;

pub fn provenance_line(master_seed: u64, config_hash: &str) -> String {
    format!("# master_seed={master_seed} config_hash={config_hash}")
}

fn csv_writer<W: Write>(mut out: W, master_seed: u64, config_hash: &str) -> io::Result<csv::Writer<W>> {
    writeln!(out, "{}", provenance_line(master_seed, config_hash))?;
    Ok(csv::Writer::from_writer(out))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> io::Result<()> {
    w.flush()
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub tier: usize,
    pub method: &'static str,
    pub mean_area: f64,
    pub ci_half_width: Option<f64>,
    pub assoc_prob: f64,
    pub zero_cell_mean: Option<f64>,
    pub reps: Option<usize>,
    pub seed: u64,
}

/// One Monte Carlo row per tier, plus one analytic row per tier when a prediction is given.
pub fn summary_rows(
    experiment_id: &str,
    stats: &AreaStatistics,
    prediction: Option<&AnalyticPrediction>,
    seed: u64,
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for t in &stats.tiers {
        rows.push(SummaryRow {
            experiment_id: experiment_id.to_string(),
            tier: t.tier + 1,
            method: "montecarlo",
            mean_area: t.typical_mean_area.mean,
            ci_half_width: Some(t.typical_mean_area.half_width),
            assoc_prob: t.empirical_assoc_prob.mean,
            zero_cell_mean: Some(t.zero_cell_mean_area.mean),
            reps: Some(stats.replications),
            seed,
        });
        if let Some(p) = prediction {
            rows.push(SummaryRow {
                experiment_id: experiment_id.to_string(),
                tier: t.tier + 1,
                method: "analytic",
                mean_area: p.per_tier_mean_area[t.tier],
                ci_half_width: None,
                assoc_prob: p.per_tier_assoc_prob[t.tier],
                zero_cell_mean: None,
                reps: None,
                seed,
            });
        }
    }
    rows
}

pub fn write_rows<W: Write, R: Serialize>(out: W, rows: &[R], master_seed: u64, config_hash: &str) -> io::Result<()> {
    let mut w = csv_writer(out, master_seed, config_hash)?;
    for row in rows {
        w.serialize(row).map_err(to_io)?;
    }
    finish(w)
}

#[derive(Serialize)]
struct RawCellRow {
    replication: u64,
    ap_index: usize,
    tier: usize,
    area: f64,
    contains_origin: bool,
}

/// Every kept cell of every replication.
pub fn write_raw_cells<W: Write>(
    out: W,
    replications: &[ReplicationOutcome],
    master_seed: u64,
    config_hash: &str,
) -> io::Result<()> {
    let mut w = csv_writer(out, master_seed, config_hash)?;
    w.write_record(["replication", "ap_index", "tier", "area", "contains_origin"])
        .map_err(to_io)?;
    for r in replications {
        for c in r.cells.iter().flatten() {
            let CellRecord {
                ap_index,
                tier,
                area,
                contains_origin,
            } = *c;
            w.serialize(RawCellRow {
                replication: r.replication,
                ap_index,
                tier: tier + 1,
                area,
                contains_origin,
            })
            .map_err(to_io)?;
        }
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeRow {
    pub experiment_id: String,
    pub tier: usize,
    pub density: f64,
    pub power_w: f64,
    pub path_loss_exponent: f64,
    pub transformed_density: f64,
    pub assoc_prob: f64,
    pub mean_area: f64,
    pub mean_area_closed_form: Option<f64>,
    pub mean_area_quadrature: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment_id: String,
    pub parameter: &'static str,
    pub parameter_tier: usize,
    pub value: f64,
    pub series_parameter: Option<&'static str>,
    pub series_tier: Option<usize>,
    pub series_value: Option<f64>,
    pub tier: usize,
    pub method: &'static str,
    pub mean_area: f64,
    pub ci_half_width: Option<f64>,
    pub assoc_prob: f64,
    pub assoc_prob_ci_half_width: Option<f64>,
    pub reps: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub tier: Option<usize>,
    pub passed: bool,
    pub skipped: bool,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub detail: String,
}
