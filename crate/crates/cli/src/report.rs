//! CSV and JSON tables. Column order is part of the output contract.

use anyhow::Result;
use serde::Serialize;
use std::io::Write;

use psam_core::policy::{percent_improvement, PolicyId, PolicyResult};

use crate::config::ExperimentConfig;

pub const RESULT_COLUMNS: [&str; 14] = [
    "model",
    "snr_db",
    "mode",
    "policy",
    "n_pilots",
    "spacing",
    "rate",
    "rate_unit",
    "baseline_rate",
    "training_beneficial",
    "improvement_pct",
    "improvement_ref",
    "pilot_powers",
    "data_powers",
];

pub const PROFILE_COLUMNS: [&str; 8] = ["slot", "role", "power", "error_variance", "isub", "m1", "m2", "p1"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub model: String,
    pub snr_db: f64,
    pub mode: String,
    pub policy: String,
    pub n_pilots: usize,
    pub spacing: usize,
    pub rate: f64,
    pub rate_unit: String,
    pub baseline_rate: f64,
    pub training_beneficial: bool,
    pub improvement_pct: Option<f64>,
    pub improvement_ref: String,
    pub pilot_powers: String,
    pub data_powers: String,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn result_rows(cfg: &ExperimentConfig, results: &[PolicyResult]) -> Vec<ResultRow> {
    let policy_i = results.iter().find(|r| r.policy == PolicyId::I);
    results
        .iter()
        .map(|r| ResultRow {
            model: cfg.model_label(),
            snr_db: cfg.snr_db,
            mode: cfg.mode.to_string(),
            policy: r.policy.to_string(),
            n_pilots: r.cluster(),
            spacing: r.spacing(),
            rate: r.rate,
            rate_unit: r.rate_unit.to_string(),
            baseline_rate: r.baseline_rate,
            training_beneficial: r.training_beneficial(),
            improvement_pct: percent_improvement(r, policy_i),
            improvement_ref: match r.policy {
                PolicyId::I => "policy I, one pilot".into(),
                _ => "policy I".into(),
            },
            pilot_powers: join(r.plan.pattern.pilot_powers()),
            data_powers: join(&r.plan.data_powers),
        })
        .collect()
}

pub fn write_results_csv<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(RESULT_COLUMNS)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub slot: usize,
    pub role: &'static str,
    pub power: f64,
    pub error_variance: Option<f64>,
    pub isub: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub p1: Option<f64>,
}

/// One row per frame slot; `isub` holds the interpolated per-slot rate.
pub fn profile_rows(result: &PolicyResult, isub: &[f64]) -> Vec<ProfileRow> {
    let k = result.cluster();
    let mut rows: Vec<ProfileRow> = result
        .plan
        .pattern
        .pilot_powers()
        .iter()
        .enumerate()
        .map(|(slot, &power)| ProfileRow {
            slot,
            role: "pilot",
            power,
            error_variance: None,
            isub: None,
            m1: None,
            m2: None,
            p1: None,
        })
        .collect();
    for (i, ((&power, &v), &rate)) in result
        .plan
        .data_powers
        .iter()
        .zip(result.profile.variances())
        .zip(isub)
        .enumerate()
    {
        let input = result.per_slot_inputs.get(i).filter(|x| !x.is_silent());
        rows.push(ProfileRow {
            slot: k + i,
            role: "data",
            power,
            error_variance: Some(v),
            isub: Some(rate),
            m1: input.map(|x| x.m1()),
            m2: input.map(|x| x.m2()),
            p1: input.map(|x| x.p1()),
        });
    }
    rows
}

pub fn write_profile_csv<W: Write>(w: W, rows: &[ProfileRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(PROFILE_COLUMNS)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
