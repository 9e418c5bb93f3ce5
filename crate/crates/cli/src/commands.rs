//! Subcommand implementations. Each writes its artifacts under the output directory.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use psam_core::mi::{build_grid_with, IsubGrid};
use psam_core::policy::{no_training_baseline, optimize_all, PolicyId, PolicyProblem, PolicyResult};

use crate::config::ExperimentConfig;
use crate::report::{profile_rows, result_rows, write_profile_csv, write_results_csv, ResultRow};
use crate::verify::{run_suite, VerifyReport, XiFn};

/// Output options shared by the commands.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutputOptions {
    /// Adds a `generated_at` field to JSON outputs.
    pub timestamp: bool,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T, opts: OutputOptions) -> Result<Vec<u8>> {
    let mut v = serde_json::to_value(value)?;
    if opts.timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        if let Some(obj) = v.as_object_mut() {
            obj.insert("generated_at".into(), secs.into());
        }
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn load_grid(path: &Path) -> Result<IsubGrid> {
    let text = fs::read_to_string(path).with_context(|| format!("reading grid {}", path.display()))?;
    IsubGrid::from_text(&text).with_context(|| format!("parsing grid {}", path.display()))
}

fn check_grid(cfg: &ExperimentConfig, grid: &IsubGrid, path: &Path) -> Result<()> {
    grid.check_noise(cfg.noise_var())
        .with_context(|| format!("grid {} does not match the configured SNR", path.display()))?;
    if grid.rate_unit() != cfg.rate_unit {
        bail!(
            "grid {} is in {}, configuration asks for {}",
            path.display(),
            grid.rate_unit(),
            cfg.rate_unit
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridStatus {
    Built,
    UpToDate,
}

/// Writes the grid for `cfg`, skipping the build when an identical one exists.
pub fn cmd_grid(cfg: &ExperimentConfig) -> Result<(PathBuf, GridStatus)> {
    let path = cfg.grid_path();
    let hash = cfg.grid_hash();
    if path.exists() {
        if let Ok(g) = load_grid(&path) {
            if g.config_hash() == Some(hash.as_str()) {
                return Ok((path, GridStatus::UpToDate));
            }
        }
    }
    let mut grid = build_grid_with(&cfg.grid_spec())?;
    grid.set_config_hash(Some(hash));
    write_file(&path, grid.to_text().as_bytes())?;
    Ok((path, GridStatus::Built))
}

/// Loads the configured grid, building it first if the file is missing.
pub fn obtain_grid(cfg: &ExperimentConfig) -> Result<IsubGrid> {
    let path = cfg.grid_path();
    if !path.exists() {
        cmd_grid(cfg)?;
    }
    let grid = load_grid(&path)?;
    check_grid(cfg, &grid, &path)?;
    Ok(grid)
}

fn problem<'a>(cfg: &ExperimentConfig, grid: &'a IsubGrid) -> PolicyProblem<'a> {
    let mut p = PolicyProblem::new(cfg.model, cfg.mode, 1.0, cfg.noise_var(), grid);
    p.k_min = cfg.k_min;
    p.k_max = cfg.k_max;
    p.t_max = cfg.t_max;
    p.papr_cap = cfg.papr_cap;
    p.seed = cfg.seed;
    p
}

#[derive(Debug, Serialize)]
struct ResultsDoc<'a> {
    model: String,
    snr_db: f64,
    noise_var: f64,
    mode: String,
    rate_unit: String,
    rows: &'a [ResultRow],
    results: &'a [PolicyResult],
}

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const PROFILE_CSV: &str = "profile.csv";
pub const VERIFY_JSON: &str = "verify.json";
pub const BASELINE_JSON: &str = "baseline.json";

/// Runs the configured policies and writes `results.csv` and `results.json`.
pub fn cmd_optimize(cfg: &ExperimentConfig, grid: &IsubGrid, opts: OutputOptions) -> Result<Vec<ResultRow>> {
    check_grid(cfg, grid, &cfg.grid_path())?;
    let results = if cfg.policies.is_empty() {
        Vec::new()
    } else {
        optimize_all(&problem(cfg, grid), &cfg.policies)?
    };
    let rows = result_rows(cfg, &results);
    ensure_dir(&cfg.out)?;
    let mut csv = Vec::new();
    write_results_csv(&mut csv, &rows)?;
    write_file(&cfg.out.join(RESULTS_CSV), &csv)?;
    let doc = ResultsDoc {
        model: cfg.model_label(),
        snr_db: cfg.snr_db,
        noise_var: cfg.noise_var(),
        mode: cfg.mode.to_string(),
        rate_unit: cfg.rate_unit.to_string(),
        rows: &rows,
        results: &results,
    };
    write_file(&cfg.out.join(RESULTS_JSON), &to_json(&doc, opts)?)?;
    Ok(rows)
}

/// Per-slot dump of the optimum of a single policy (the highest one configured).
pub fn cmd_profile(cfg: &ExperimentConfig, grid: &IsubGrid) -> Result<PolicyResult> {
    check_grid(cfg, grid, &cfg.grid_path())?;
    let policy = cfg.policies.last().copied().unwrap_or(PolicyId::IV);
    let mut prob = problem(cfg, grid);
    prob.with_inputs = true;
    let wanted: Vec<PolicyId> = PolicyId::ALL.into_iter().filter(|p| *p <= policy).collect();
    let result = optimize_all(&prob, &wanted)?
        .pop()
        .expect("at least one policy was run");
    let isub = result
        .plan
        .data_powers
        .iter()
        .zip(result.profile.variances())
        .map(|(&p, &v)| grid.interpolate(p, v))
        .collect::<psam_core::Result<Vec<f64>>>()?;
    let mut csv = Vec::new();
    write_profile_csv(&mut csv, &profile_rows(&result, &isub))?;
    write_file(&cfg.out.join(PROFILE_CSV), &csv)?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineDoc {
    pub model: String,
    pub snr_db: f64,
    pub noise_var: f64,
    pub rate: f64,
    pub rate_unit: String,
}

pub fn cmd_baseline(cfg: &ExperimentConfig, grid: &IsubGrid, opts: OutputOptions) -> Result<BaselineDoc> {
    check_grid(cfg, grid, &cfg.grid_path())?;
    let doc = BaselineDoc {
        model: cfg.model_label(),
        snr_db: cfg.snr_db,
        noise_var: cfg.noise_var(),
        rate: no_training_baseline(1.0, cfg.noise_var(), grid)?,
        rate_unit: grid.rate_unit().to_string(),
    };
    write_file(&cfg.out.join(BASELINE_JSON), &to_json(&doc, opts)?)?;
    Ok(doc)
}

pub fn cmd_verify(cfg: &ExperimentConfig, xi: &XiFn, opts: OutputOptions) -> Result<VerifyReport> {
    let report = run_suite(xi, cfg.seed)?;
    write_file(&cfg.out.join(VERIFY_JSON), &to_json(&report, opts)?)?;
    Ok(report)
}
