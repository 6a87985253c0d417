//! End-to-end runs of the `hetnet-cells` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hetnet-cells"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

#[test]
fn reference_config_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("reference.json");
    let out = run(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let csv = std::fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    assert!(csv.starts_with("# master_seed=2024 config_hash="));
    assert!(!csv.contains(",false,false,"), "{csv}");
}

#[test]
fn negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("reference.json");
    let out = run(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--reps",
        "400",
        "--negative-control",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
    assert!(text(&out).contains("FAIL zero_cell_mean_unweighted"));
}

#[test]
fn empty_tier_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    std::fs::write(&cfg, r#"{"window": {"side_length": 5, "resolution": 10}, "tiers": []}"#).unwrap();
    let target = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("tiers"), "{}", text(&out));
    assert!(!target.exists());
}

#[test]
fn syntax_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    std::fs::write(&cfg, "{\n  \"window\": {\"side_length\": 5, \"resolution\": 10},\n  \"tiers\": [\n    {\"power_dbm\": 30,}\n  ]\n}\n").unwrap();
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("line 4"), "{}", text(&out));
}

#[test]
fn simulate_is_reproducible_and_dumps_rasters() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("two_tier_maps.json");
    for dir in [&a, &b] {
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--reps",
            "4",
            "--seed",
            "99",
        ]);
        assert!(out.status.success(), "{}", text(&out));
    }
    for f in ["summary.csv", "raster_0000.txt"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let summary = std::fs::read_to_string(a.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("# master_seed=99 config_hash="));
    assert_eq!(
        lines.next().unwrap(),
        "experiment_id,tier,method,mean_area,ci_half_width,assoc_prob,zero_cell_mean,reps,seed"
    );

    let raster = std::fs::read_to_string(a.path().join("raster_0000.txt")).unwrap();
    let mut lines = raster.lines().skip(1);
    assert_eq!(lines.next().unwrap(), "500 500 10");
    assert_eq!(lines.count(), 500);

    let echoed = std::fs::read_to_string(a.path().join("config.json")).unwrap();
    let reparsed = hetnet_cells::SimulationConfig::from_json_str(&echoed).unwrap();
    assert_eq!(reparsed.master_seed, 99);
    assert_eq!(reparsed.replications, 4);
}

#[test]
fn oracle_flag_cross_checks_small_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    std::fs::write(
        &cfg,
        r#"{"window": {"side_length": 6, "resolution": 60},
            "tiers": [{"power_dbm": 40, "density": 0.5, "path_loss_exponent": 4,
                       "fading": {"kind": "lognormal", "sigma": 2}},
                      {"power_dbm": 30, "density": 1.5, "path_loss_exponent": 3,
                       "fading": {"kind": "exponential"}}],
            "strategy": "max_sir", "gain_mode": "per_evaluation_point", "replications": 3}"#,
    )
    .unwrap();
    let args = [
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--oracle",
    ];
    let out = run(&args);
    assert!(out.status.success(), "{}", text(&out));

    let big = config("two_tier_maps.json");
    let out = run(&[
        "simulate",
        "--config",
        big.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--reps",
        "2",
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("too large"), "{}", text(&out));
}

#[test]
fn analyze_writes_both_area_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("reference.json");
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let csv = std::fs::read_to_string(dir.path().join("analyze.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(csv.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (closed, quad, prob) = (
        col("mean_area_closed_form"),
        col("mean_area_quadrature"),
        col("assoc_prob"),
    );
    let mut total = 0.0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let c: f64 = rec[closed].parse().unwrap();
        let q: f64 = rec[quad].parse().unwrap();
        assert!((c - q).abs() / c < 1e-6);
        total += rec[prob].parse::<f64>().unwrap();
    }
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn sweep_writes_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("sigma_sweep.json");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--reps",
        "2",
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    // 2 series x 6 values x 2 tiers x 2 methods
    assert_eq!(csv.lines().count(), 2 + 48);
}
