use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use moccas::config::{AblationAxis, ExperimentConfig};
use moccas::experiment;

#[derive(Parser)]
#[command(version, about = "Coverage-driven active search over multi-objective constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: first configured policy, first seed.
    Run(Common),
    /// Every configured policy over every seed.
    Bench(Common),
    /// Sweep `r` or `beta0` for MOC-CAS.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Option<AblationAxis>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Hard versus soft acquisition gap check.
    Check(Common),
}

fn execute(cli: Cli) -> moccas::Result<()> {
    let common = match &cli.command {
        Command::Run(c) | Command::Bench(c) | Command::Check(c) => c,
        Command::Ablate { common, .. } => common,
    };
    let config = ExperimentConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| moccas::Error::Validation {
            field: "out".into(),
            reason: "pass --out or set `out` in the config".into(),
        })?;
    let workers = common.workers;
    match &cli.command {
        Command::Run(_) => {
            let report = experiment::run_single(&config, &out, workers)?;
            for r in &report.results {
                println!("{} seed {}: AUP {} positives {}", r.policy, r.seed, r.summary.aup, r.summary.final_positives);
            }
        }
        Command::Bench(_) => {
            let report = experiment::bench(&config, &out, workers)?;
            for (policy, s) in &report.summaries {
                let t_at: Vec<String> = s
                    .t_at
                    .iter()
                    .map(|(x, a)| match a.mean {
                        Some(m) if a.not_reached == 0 => format!("T@{x} {m:.1}"),
                        Some(m) => format!("T@{x} {m:.1} ({} >budget)", a.not_reached),
                        None => format!("T@{x} >budget"),
                    })
                    .collect();
                println!(
                    "{policy:>12}  AUP {:.1} ± {:.1}  positives {:.1}  fill {:.4}  {}",
                    s.aup.mean,
                    s.aup.se,
                    s.positives.mean,
                    s.fill.mean,
                    t_at.join("  ")
                );
            }
        }
        Command::Ablate { axis, values, .. } => {
            let axis = axis.or(config.ablate_axis).ok_or_else(|| moccas::Error::Validation {
                field: "ablate_axis".into(),
                reason: "pass --axis or set `ablate_axis` in the config".into(),
            })?;
            let values = if values.is_empty() { &config.ablate_values } else { values };
            let table = experiment::ablate(&config, axis, values, &out, workers)?;
            for (v, s) in &table {
                println!("{}={v:<8} AUP {:.1} ± {:.1}  fill {:.4}", axis.name(), s.aup.mean, s.aup.se, s.fill.mean);
            }
        }
        Command::Check(_) => {
            let report = experiment::check(&config, &out, workers)?;
            println!(
                "check passed: max gap {:.5}, max spearman {:.3}",
                report.max_asserted_gap, report.max_spearman
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
