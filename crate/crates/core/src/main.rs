//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain infeasibility or guard violation,
//! 2 usage/parse error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kgscatter::cli;
use kgscatter::config::{Mode, RunConfig};
use kgscatter::error::Error;

#[derive(Parser)]
#[command(name = "kgscatter", version, about = "Klein-Gordon cubic-convolution scattering toolkit")]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "theorem" => Ok(Mode::Theorem),
        "exploratory" => Ok(Mode::Exploratory),
        other => Err(format!("mode must be theorem|exploratory, got {other}")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the admissibility region and derived exponents.
    CheckParams {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the Strang integrator; write norms CSV and field snapshots.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Forward scattering diagnostics or the final-state problem.
    Scatter {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Parameter sweep; one CSV row per run.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Built-in verification battery.
    Selftest {
        /// Seed for the randomized checks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_path(&common.config)?;
    if let Some(mode) = common.mode {
        cfg.mode = mode;
    }
    if let Some(threads) = common.threads {
        cfg.threads = Some(threads);
    }
    Ok(cfg)
}

fn out_dir(common: &CommonArgs, cfg: &RunConfig) -> Result<PathBuf, Error> {
    common
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("this command needs --out <dir> or config.output_dir".into()))
}

fn run() -> Result<ExitCode, Error> {
    match CliArgs::parse().command {
        Command::CheckParams { common } => {
            let cfg = load_config(&common)?;
            let (json, feasible) = cli::cmd_check_params(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(if feasible { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Simulate { common } => {
            let cfg = load_config(&common)?;
            let out = out_dir(&common, &cfg)?;
            let summary = cli::cmd_simulate(&cfg, &out)?;
            eprintln!(
                "simulate: {} samples, energy drift {:.3e}, wrote {}",
                summary.samples,
                summary.energy_drift,
                summary.csv_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Scatter { common } => {
            let cfg = load_config(&common)?;
            let out = out_dir(&common, &cfg)?;
            let summary = cli::cmd_scatter(&cfg, &out)?;
            match summary.delta_fit {
                Some(delta) => eprintln!("scatter: delta_fit = {delta:.4}"),
                None => eprintln!(
                    "scatter: no decay fit ({})",
                    if summary.free_flow { "free flow" } else { "insufficient data" }
                ),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { common } => {
            let cfg = load_config(&common)?;
            let out = out_dir(&common, &cfg)?;
            let csv = cli::cmd_sweep(&cfg, &out)?;
            eprintln!("sweep: wrote {}", csv.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { seed } => {
            let ok = cli::cmd_selftest(seed)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
