use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use hetnet_cells::cli::{self, Overrides};
use hetnet_cells::config::SimulationConfig;

#[derive(Parser)]
#[command(
    name = "hetnet-cells",
    version,
    about = "Association cells of multi-tier random wireless networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the replication count.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo replications and write the summary CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Cross-check the first replications against the brute-force oracle.
        #[arg(long, hide = true)]
        oracle: bool,
    },
    /// Evaluate the mean-area and association-probability formulas.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured parameter sweep and write long-format CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Check the Palm-calculus identities; exits nonzero on any failure.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Compare zero cells against unweighted typical cells (expected to fail).
        #[arg(long)]
        negative_control: bool,
    },
}

fn load(common: &Common) -> anyhow::Result<SimulationConfig> {
    let overrides = Overrides {
        seed: common.seed,
        replications: common.reps,
        out: common.out.clone(),
    };
    let config = cli::load_config(&common.config, &overrides)?;
    for w in config.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(config)
}

fn run(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Simulate { common, oracle } => {
            let config = load(&common)?;
            let outcome = cli::cmd_simulate(&config, oracle).context("simulate")?;
            for t in &outcome.experiment.statistics.tiers {
                println!(
                    "tier {}: mean area {:.6} +/- {:.6}, association probability {:.6}",
                    t.tier + 1,
                    t.typical_mean_area.mean,
                    t.typical_mean_area.half_width,
                    t.empirical_assoc_prob.mean
                );
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            Ok(true)
        }
        Command::Analyze { common } => {
            let config = load(&common)?;
            let p = cli::cmd_analyze(&config).context("analyze")?;
            for (i, (m, a)) in p.per_tier_mean_area.iter().zip(&p.per_tier_assoc_prob).enumerate() {
                println!("tier {}: mean area {m:.9}, association probability {a:.9}", i + 1);
            }
            Ok(true)
        }
        Command::Sweep { common } => {
            let config = load(&common)?;
            let rows = cli::cmd_sweep(&config).context("sweep")?;
            println!("wrote {} rows", rows.len());
            Ok(true)
        }
        Command::Validate {
            common,
            negative_control,
        } => {
            let config = load(&common)?;
            let report = cli::cmd_validate(&config, negative_control).context("validate")?;
            print!("{}", report.render());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
