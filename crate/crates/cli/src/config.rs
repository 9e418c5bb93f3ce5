//! Experiment configuration: a flat TOML file merged with command-line overrides.

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use psam_core::mi::{GridSpec, QuadratureSpec, RateUnit};
use psam_core::policy::PolicyId;
use psam_core::{noise_var_from_snr_db, EstimationMode, FadingModel};

/// Every field is optional so that a config file and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigArgs {
    /// Fading model: gauss_markov or jakes.
    #[arg(long)]
    pub model: Option<String>,
    /// Gauss-Markov correlation coefficient.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Jakes Doppler frequency in Hz.
    #[arg(long)]
    pub fd: Option<f64>,
    /// Jakes symbol rate in Hz.
    #[arg(long)]
    pub fs: Option<f64>,
    /// Received SNR in dB at unit average power.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// causal or noncausal.
    #[arg(long)]
    pub mode: Option<String>,
    /// 1, 2, 3, 4, all, a comma-separated list, or none.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub kmin: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub tmax: Option<usize>,
    /// Peak pilot power over average power.
    #[arg(long = "papr-cap")]
    pub papr_cap: Option<f64>,
    #[arg(long = "grid-file")]
    pub grid_file: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// bits or nats.
    #[arg(long = "rate-unit")]
    pub rate_unit: Option<String>,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long = "p-max")]
    pub p_max: Option<f64>,
    #[arg(long = "p-points")]
    pub p_points: Option<usize>,
    #[arg(long = "v-points")]
    pub v_points: Option<usize>,
}

impl ConfigArgs {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid config file")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: ConfigArgs) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigArgs { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            model, alpha, fd, fs, snr_db, mode, policy, kmin, kmax, tmax, papr_cap, grid_file, out, seed, rate_unit,
            jobs, p_max, p_points, v_points
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: FadingModel,
    pub snr_db: f64,
    pub mode: EstimationMode,
    pub policies: Vec<PolicyId>,
    pub k_min: usize,
    pub k_max: usize,
    pub t_max: usize,
    pub papr_cap: Option<f64>,
    pub grid_file: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub rate_unit: RateUnit,
    pub jobs: usize,
    pub p_max: f64,
    pub p_points: usize,
    pub v_points: usize,
}

pub fn parse_policies(s: &str) -> Result<Vec<PolicyId>> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("all") {
        return Ok(PolicyId::ALL.to_vec());
    }
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut out = s
        .split(',')
        .map(|p| p.parse::<PolicyId>().map_err(anyhow::Error::msg))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

impl ExperimentConfig {
    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let model = match args.model.as_deref().unwrap_or("gauss_markov") {
            "gauss_markov" | "gauss-markov" | "gm" => FadingModel::gauss_markov(args.alpha.unwrap_or(0.99))?,
            "jakes" => FadingModel::jakes_from_rate(args.fd.unwrap_or(100.0), args.fs.unwrap_or(10_000.0))?,
            other => bail!("unknown model '{other}' (expected gauss_markov or jakes)"),
        };
        let snr_db = args.snr_db.unwrap_or(0.0);
        if !snr_db.is_finite() {
            bail!("snr_db must be finite");
        }
        let mode: EstimationMode = args
            .mode
            .as_deref()
            .unwrap_or("causal")
            .parse()
            .map_err(anyhow::Error::msg)?;
        let rate_unit: RateUnit = args
            .rate_unit
            .as_deref()
            .unwrap_or("bits")
            .parse()
            .map_err(anyhow::Error::msg)?;
        let cfg = Self {
            model,
            snr_db,
            mode,
            policies: parse_policies(args.policy.as_deref().unwrap_or("all"))?,
            k_min: args.kmin.unwrap_or(1),
            k_max: args.kmax.unwrap_or(6),
            t_max: args.tmax.unwrap_or(120),
            papr_cap: args.papr_cap,
            grid_file: args.grid_file.clone(),
            out: args.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            seed: args.seed.unwrap_or(0),
            rate_unit,
            jobs: args.jobs.unwrap_or(0),
            p_max: args.p_max.unwrap_or(10.0),
            p_points: args.p_points.unwrap_or(60),
            v_points: args.v_points.unwrap_or(60),
        };
        if cfg.k_min < 1 || cfg.k_min > cfg.k_max || cfg.t_max <= cfg.k_max {
            bail!(
                "need 1 <= kmin <= kmax < tmax, got kmin = {}, kmax = {}, tmax = {}",
                cfg.k_min,
                cfg.k_max,
                cfg.t_max
            );
        }
        if let Some(c) = cfg.papr_cap {
            if !(c > 0.0) {
                bail!("papr_cap must be positive, got {c}");
            }
        }
        Ok(cfg)
    }

    pub fn noise_var(&self) -> f64 {
        noise_var_from_snr_db(self.snr_db)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            p_max: self.p_max,
            p_points: self.p_points,
            v_points: self.v_points,
            noise_var: self.noise_var(),
            rate_unit: self.rate_unit,
            quadrature: QuadratureSpec::default(),
            seed: self.seed,
        }
    }

    /// SHA-256 over everything the grid depends on.
    pub fn grid_hash(&self) -> String {
        let s = self.grid_spec();
        let canon = format!(
            "noise_var={:e}\np_max={:e}\np_points={}\nv_points={}\nrate_unit={}\noutput_nodes={}\nmagnitude_nodes={}\nseed={}\n",
            s.noise_var,
            s.p_max,
            s.p_points,
            s.v_points,
            s.rate_unit,
            s.quadrature.output_nodes,
            s.quadrature.magnitude_nodes,
            s.seed
        );
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    /// Grid path: the explicit one, or a hash-named file in the output directory.
    pub fn grid_path(&self) -> PathBuf {
        self.grid_file
            .clone()
            .unwrap_or_else(|| self.out.join(format!("isub_grid_{}.txt", &self.grid_hash()[..16])))
    }

    pub fn model_label(&self) -> String {
        match self.model {
            FadingModel::GaussMarkov { alpha } => format!("gauss_markov(alpha={alpha})"),
            FadingModel::Jakes {
                doppler_hz,
                symbol_period_s,
            } => format!("jakes(fd={doppler_hz},fs={})", 1.0 / symbol_period_s),
        }
    }
}
