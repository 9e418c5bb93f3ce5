//! Command-line front end: grid building, policy optimization, per-slot
//! profiles, the no-training baseline and the verification suite.

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

use commands::{GridStatus, OutputOptions};
use config::{ConfigArgs, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "psam", version, about = "Pilot training design for binary signaling over correlated Rayleigh fading")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Flat TOML file with the same keys as the flags (snake_case).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Add a generation timestamp to JSON outputs.
    #[arg(long, global = true)]
    pub timestamp: bool,
    #[command(flatten)]
    pub args: ConfigArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate I_sub(P, v) and write the grid file.
    Grid(Common),
    /// Optimize the configured policies; writes results.csv and results.json.
    Optimize(Common),
    /// Run the theorem, lemma and xi checks; writes verify.json.
    Verify(Common),
    /// Per-slot power, error variance and input dump; writes profile.csv.
    Profile(Common),
    /// Rate without training; writes baseline.json.
    Baseline(Common),
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(p) => ConfigArgs::load(p)?,
        None => ConfigArgs::default(),
    };
    let cfg = ExperimentConfig::resolve(&base.merged(common.args.clone()))?;
    if cfg.jobs > 0 {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Grid(c) => {
            let cfg = resolve(&c)?;
            let (path, status) = commands::cmd_grid(&cfg)?;
            let what = match status {
                GridStatus::Built => "wrote",
                GridStatus::UpToDate => "up to date:",
            };
            println!("{what} {}", path.display());
        }
        Command::Optimize(c) => {
            let cfg = resolve(&c)?;
            let grid = commands::obtain_grid(&cfg)?;
            let rows = commands::cmd_optimize(&cfg, &grid, OutputOptions { timestamp: c.timestamp })?;
            println!("{:<6} {:>3} {:>4} {:>10} {:>10} {:>9}", "policy", "nP", "T", "rate", "baseline", "gain %");
            for r in &rows {
                let gain = r.improvement_pct.map(|g| format!("{g:.1}")).unwrap_or_default();
                println!(
                    "{:<6} {:>3} {:>4} {:>10.4} {:>10.4} {:>9}",
                    r.policy, r.n_pilots, r.spacing, r.rate, r.baseline_rate, gain
                );
            }
        }
        Command::Verify(c) => {
            let cfg = resolve(&c)?;
            let report = commands::cmd_verify(&cfg, verify::default_xi(), OutputOptions { timestamp: c.timestamp })?;
            for chk in &report.checks {
                println!("{} {}: {}", if chk.passed { "PASS" } else { "FAIL" }, chk.name, chk.detail);
            }
            if !report.passed {
                return Ok(EXIT_VERIFY_FAILED);
            }
        }
        Command::Profile(c) => {
            let cfg = resolve(&c)?;
            let grid = commands::obtain_grid(&cfg)?;
            let r = commands::cmd_profile(&cfg, &grid)?;
            println!(
                "policy {}: nP = {}, T = {}, rate = {:.4} {}",
                r.policy,
                r.cluster(),
                r.spacing(),
                r.rate,
                r.rate_unit
            );
        }
        Command::Baseline(c) => {
            let cfg = resolve(&c)?;
            let grid = commands::obtain_grid(&cfg)?;
            let b = commands::cmd_baseline(&cfg, &grid, OutputOptions { timestamp: c.timestamp })?;
            println!("no-training rate = {:.6} {}", b.rate, b.rate_unit);
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
