//! Frame rates and training optimizers for the four transmission policies.
//!
//! * I: every symbol, pilot or data, is sent at the average power.
//! * II: flat pilot power `P_tr` and flat data power `P_d` under the average budget.
//! * III: flat pilot power, data powers allocated per slot.
//! * IV: pilot and data powers all allocated per slot.
//!
//! Rates are `(1/T) sum_{j=k}^{T-1} I_sub(P_j, v_j)` read off an [`IsubGrid`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{error_variance_profile, EstimationMode, ErrorProfile, PilotPattern};
use crate::fading::FadingModel;
use crate::mi::{BinaryInput, IsubGrid, IsubOptimizer, QuadratureSpec, RateUnit};
use crate::optim::golden_section_max;

const SCAN_POINTS: usize = 32;
const TRANSFER_TOL: f64 = 1e-12;
const MAX_TRANSFERS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyId {
    I,
    II,
    III,
    IV,
}

impl PolicyId {
    pub const ALL: [PolicyId; 4] = [PolicyId::I, PolicyId::II, PolicyId::III, PolicyId::IV];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

impl std::fmt::Display for PolicyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyId::I => "I",
            PolicyId::II => "II",
            PolicyId::III => "III",
            PolicyId::IV => "IV",
        })
    }
}

impl std::str::FromStr for PolicyId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "1" | "I" => Ok(PolicyId::I),
            "2" | "II" => Ok(PolicyId::II),
            "3" | "III" => Ok(PolicyId::III),
            "4" | "IV" => Ok(PolicyId::IV),
            other => Err(format!("unknown policy '{other}'")),
        }
    }
}

/// Pilot pattern plus the powers of the data slots `k..T-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub pattern: PilotPattern,
    pub data_powers: Vec<f64>,
}

impl FramePlan {
    pub fn new(pattern: PilotPattern, data_powers: Vec<f64>) -> Result<Self> {
        if data_powers.len() != pattern.data_slots() {
            return Err(Error::InvalidPattern(format!(
                "{} data powers for {} data slots",
                data_powers.len(),
                pattern.data_slots()
            )));
        }
        if let Some(&p) = data_powers.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::NegativePower(p));
        }
        Ok(Self { pattern, data_powers })
    }

    pub fn pilot_energy(&self) -> f64 {
        self.pattern.pilot_powers().iter().sum()
    }

    pub fn data_energy(&self) -> f64 {
        self.data_powers.iter().sum()
    }

    pub fn average_power(&self) -> f64 {
        (self.pilot_energy() + self.data_energy()) / self.pattern.spacing() as f64
    }

    /// Powers of all `T` slots in frame order.
    pub fn slot_powers(&self) -> Vec<f64> {
        let mut p = self.pattern.pilot_powers().to_vec();
        p.extend_from_slice(&self.data_powers);
        p
    }
}

/// Best rate found for one cluster size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterBest {
    pub cluster: usize,
    pub spacing: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub policy: PolicyId,
    pub plan: FramePlan,
    pub profile: ErrorProfile,
    pub rate: f64,
    pub rate_unit: RateUnit,
    /// Optimal binary input of every data slot; empty unless requested.
    pub per_slot_inputs: Vec<BinaryInput>,
    pub baseline_rate: f64,
    pub best_by_cluster: Vec<ClusterBest>,
}

impl PolicyResult {
    pub fn cluster(&self) -> usize {
        self.plan.pattern.cluster()
    }

    pub fn spacing(&self) -> usize {
        self.plan.pattern.spacing()
    }

    pub fn training_beneficial(&self) -> bool {
        self.rate > self.baseline_rate
    }

    /// Share of the frame energy spent on pilots.
    pub fn pilot_share(&self) -> f64 {
        let total = self.plan.pilot_energy() + self.plan.data_energy();
        if total > 0.0 {
            self.plan.pilot_energy() / total
        } else {
            0.0
        }
    }

    pub fn one_pilot_rate(&self) -> Option<f64> {
        self.best_by_cluster.iter().find(|b| b.cluster == 1).map(|b| b.rate)
    }
}

/// Search space and constraints shared by all policies.
#[derive(Debug, Clone)]
pub struct PolicyProblem<'a> {
    pub model: FadingModel,
    pub mode: EstimationMode,
    pub p_avg: f64,
    pub noise_var: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub t_max: usize,
    /// Peak pilot power as a multiple of `p_avg`.
    pub papr_cap: Option<f64>,
    /// Stop scanning `T` after this many consecutive rate decreases.
    pub early_stop: usize,
    pub with_inputs: bool,
    pub seed: u64,
    pub grid: &'a IsubGrid,
}

impl<'a> PolicyProblem<'a> {
    pub fn new(model: FadingModel, mode: EstimationMode, p_avg: f64, noise_var: f64, grid: &'a IsubGrid) -> Self {
        Self {
            model,
            mode,
            p_avg,
            noise_var,
            k_min: 1,
            k_max: 6,
            t_max: 120,
            papr_cap: None,
            early_stop: 15,
            with_inputs: false,
            seed: 0,
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.grid.check_noise(self.noise_var)?;
        if !(self.p_avg > 0.0 && self.p_avg <= self.grid.p_max()) {
            return Err(Error::InvalidSearch(format!(
                "average power {} outside (0, {}]",
                self.p_avg,
                self.grid.p_max()
            )));
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(Error::InvalidSearch(format!(
                "cluster range [{}, {}] is empty",
                self.k_min, self.k_max
            )));
        }
        if self.t_max <= self.k_max {
            return Err(Error::InvalidSearch(format!(
                "t_max = {} must exceed k_max = {}",
                self.t_max, self.k_max
            )));
        }
        if let Some(c) = self.papr_cap {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidSearch(format!("PAPR cap must be positive, got {c}")));
            }
        }
        Ok(())
    }

    fn budget(&self, spacing: usize) -> f64 {
        spacing as f64 * self.p_avg
    }

    fn pilot_cap(&self, cluster: usize, spacing: usize) -> f64 {
        let full = self.budget(spacing) / cluster as f64;
        match self.papr_cap {
            Some(c) => full.min(c * self.p_avg),
            None => full,
        }
    }

    fn profile(&self, spacing: usize, pilots: Vec<f64>) -> Result<(PilotPattern, ErrorProfile)> {
        let pattern = PilotPattern::new(spacing, self.mode, pilots)?;
        let profile = error_variance_profile(&self.model, &pattern, self.noise_var)?;
        Ok((pattern, profile))
    }

    fn slot_rate(&self, p: f64, v: f64) -> f64 {
        self.grid.interpolate(p, v).unwrap_or(f64::NEG_INFINITY)
    }

    fn theorem_shortcut(&self) -> bool {
        matches!(self.model, FadingModel::GaussMarkov { .. })
            && self.mode == EstimationMode::Causal
            && self.papr_cap.is_none()
            && self.k_min == 1
    }
}

/// `(1/T) sum_j I_sub(P_j, v_j)` over the data slots of `plan`.
pub fn frame_rate(plan: &FramePlan, model: &FadingModel, noise_var: f64, grid: &IsubGrid) -> Result<f64> {
    grid.check_noise(noise_var)?;
    let profile = error_variance_profile(model, &plan.pattern, noise_var)?;
    let mut sum = 0.0;
    for (&p, &v) in plan.data_powers.iter().zip(profile.variances()) {
        sum += grid.interpolate(p, v)?;
    }
    Ok(sum / plan.pattern.spacing() as f64)
}

/// Rate of an untrained frame: every slot carries data at `p_avg` with `v = 1`.
pub fn no_training_baseline(p_avg: f64, noise_var: f64, grid: &IsubGrid) -> Result<f64> {
    grid.check_noise(noise_var)?;
    grid.interpolate(p_avg, 1.0)
}

#[derive(Debug, Clone)]
struct Candidate {
    cluster: usize,
    spacing: usize,
    pilots: Vec<f64>,
    data: Vec<f64>,
    rate: f64,
}

impl Candidate {
    /// Strictly better, or equal with the smaller `(k, T, powers)` key.
    fn beats(&self, other: &Candidate) -> bool {
        if self.rate != other.rate {
            return self.rate > other.rate;
        }
        let key = |c: &Candidate| (c.cluster, c.spacing);
        if key(self) != key(other) {
            return key(self) < key(other);
        }
        let a = self.pilots.iter().chain(&self.data);
        let b = other.pilots.iter().chain(&other.data);
        a.zip(b)
            .find(|(x, y)| x != y)
            .map_or(false, |(x, y)| x < y)
    }
}

fn pick(best: &mut Option<Candidate>, c: Candidate) {
    if best.as_ref().map_or(true, |b| c.beats(b)) {
        *best = Some(c);
    }
}

/// Scans `T` for every cluster size, evaluating `frame` at each `(k, T)`.
fn search<F>(prob: &PolicyProblem, clusters: &[usize], frame: F) -> Result<(Option<Candidate>, Vec<ClusterBest>)>
where
    F: Fn(usize, usize) -> Result<Option<Candidate>> + Sync,
{
    let per_k: Vec<Result<Option<Candidate>>> = clusters
        .par_iter()
        .map(|&k| {
            let mut best: Option<Candidate> = None;
            let mut prev = f64::NEG_INFINITY;
            let mut decreases = 0;
            for t in k + 1..=prob.t_max {
                let Some(c) = frame(k, t)? else { continue };
                if c.rate < prev {
                    decreases += 1;
                } else {
                    decreases = 0;
                }
                prev = c.rate;
                pick(&mut best, c);
                if decreases >= prob.early_stop {
                    break;
                }
            }
            Ok(best)
        })
        .collect();

    let mut overall = None;
    let mut by_k = Vec::new();
    for r in per_k {
        if let Some(c) = r? {
            by_k.push(ClusterBest {
                cluster: c.cluster,
                spacing: c.spacing,
                rate: c.rate,
            });
            pick(&mut overall, c);
        }
    }
    Ok((overall, by_k))
}

fn flat_data(prob: &PolicyProblem, k: usize, t: usize, p_tr: f64) -> f64 {
    ((prob.budget(t) - k as f64 * p_tr) / (t - k) as f64).max(0.0)
}

fn rate_of(prob: &PolicyProblem, t: usize, data: &[f64], profile: &ErrorProfile) -> f64 {
    let s: f64 = data
        .iter()
        .zip(profile.variances())
        .map(|(&p, &v)| prob.slot_rate(p, v))
        .sum();
    s / t as f64
}

/// Maximizes `sum_i I_sub(P_i, v_i)` over `P_i >= 0`, `sum P_i = budget`, by
/// pairwise transfers with a halving step, starting from a flat allocation.
fn allocate_data(prob: &PolicyProblem, vs: &[f64], budget: f64) -> Vec<f64> {
    let n = vs.len();
    if n == 0 || budget <= 0.0 {
        return vec![0.0; n];
    }
    let p_max = prob.grid.p_max();
    let mut p = vec![budget / n as f64; n];
    let f = |i: usize, x: f64| prob.slot_rate(x, vs[i]);
    let mut delta = budget / n as f64 / 2.0;
    let min_delta = 1e-9 * budget.max(1.0);
    let mut cur: Vec<f64> = (0..n).map(|i| f(i, p[i])).collect();
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    let refresh = |i: usize, p: &[f64], cur: &[f64], up: &mut [f64], down: &mut [f64], delta: f64| {
        up[i] = if p[i] + delta <= p_max { f(i, p[i] + delta) - cur[i] } else { f64::NEG_INFINITY };
        down[i] = if p[i] >= delta { cur[i] - f(i, p[i] - delta) } else { f64::INFINITY };
    };
    for i in 0..n {
        refresh(i, &p, &cur, &mut up, &mut down, delta);
    }
    let mut moves = 0;
    while delta >= min_delta && moves < MAX_TRANSFERS {
        // Best receiver with its cheapest distinct donor, or the reverse.
        let pair = |i: Option<usize>, j: Option<usize>| match (i, j) {
            (Some(i), Some(j)) => Some((i, j, up[i] - down[j])),
            _ => None,
        };
        let gi = argmax_except(&up, None);
        let a = pair(gi, argmin_except(&down, gi));
        let lj = argmin_except(&down, None);
        let b = pair(argmax_except(&up, lj), lj);
        let best = match (a, b) {
            (Some(a), Some(b)) => Some(if b.2 > a.2 { b } else { a }),
            (a, b) => a.or(b),
        };
        match best {
            Some((i, j, g)) if g > TRANSFER_TOL => {
                p[i] += delta;
                p[j] -= delta;
                if p[j] < 0.0 {
                    p[j] = 0.0;
                }
                cur[i] = f(i, p[i]);
                cur[j] = f(j, p[j]);
                refresh(i, &p, &cur, &mut up, &mut down, delta);
                refresh(j, &p, &cur, &mut up, &mut down, delta);
                moves += 1;
            }
            _ => {
                delta *= 0.5;
                for i in 0..n {
                    refresh(i, &p, &cur, &mut up, &mut down, delta);
                }
            }
        }
    }
    p
}

fn argmax_except(xs: &[f64], skip: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if Some(i) == skip || x == f64::NEG_INFINITY {
            continue;
        }
        if best.map_or(true, |b| x > xs[b]) {
            best = Some(i);
        }
    }
    best
}

fn argmin_except(xs: &[f64], skip: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if Some(i) == skip || x == f64::INFINITY {
            continue;
        }
        if best.map_or(true, |b| x < xs[b]) {
            best = Some(i);
        }
    }
    best
}

fn policy_i_frame(prob: &PolicyProblem, k: usize, t: usize) -> Result<Option<Candidate>> {
    let (_, profile) = prob.profile(t, vec![prob.p_avg; k])?;
    let data = vec![prob.p_avg; t - k];
    let rate = rate_of(prob, t, &data, &profile);
    Ok(Some(Candidate {
        cluster: k,
        spacing: t,
        pilots: vec![prob.p_avg; k],
        data,
        rate,
    }))
}

/// Line search over the flat pilot power: coarse scan, then golden section
/// around the best scan point. `extra` candidates are always evaluated.
fn pilot_power_search<F>(hi: f64, extra: &[f64], mut g: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let xs: Vec<f64> = (1..=SCAN_POINTS).map(|i| hi * i as f64 / SCAN_POINTS as f64).collect();
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let mut best_i = 0;
    for (i, &x) in xs.iter().enumerate() {
        let r = g(x)?;
        if r > best.1 {
            best = (x, r);
            best_i = i;
        }
    }
    let lo = if best_i == 0 { 0.0 } else { xs[best_i - 1] };
    let up = xs[(best_i + 1).min(SCAN_POINTS - 1)];
    let mut err = None;
    let (x, r) = golden_section_max(
        |x| match g(x) {
            Ok(r) => r,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        up,
        1e-7 * hi,
    );
    if let Some(e) = err {
        return Err(e);
    }
    if r > best.1 {
        best = (x, r);
    }
    for &x in extra {
        if x > 0.0 && x <= hi {
            let r = g(x)?;
            if r > best.1 {
                best = (x, r);
            }
        }
    }
    Ok(best)
}

fn policy_ii_frame(prob: &PolicyProblem, k: usize, t: usize) -> Result<Option<Candidate>> {
    let hi = prob.pilot_cap(k, t);
    let p_max = prob.grid.p_max();
    let g = |p_tr: f64| -> Result<f64> {
        let pd = flat_data(prob, k, t, p_tr);
        if pd > p_max {
            return Ok(f64::NEG_INFINITY);
        }
        let (_, profile) = prob.profile(t, vec![p_tr; k])?;
        Ok(rate_of(prob, t, &vec![pd; t - k], &profile))
    };
    let (p_tr, rate) = pilot_power_search(hi, &[prob.p_avg], g)?;
    if !rate.is_finite() {
        return Ok(None);
    }
    Ok(Some(Candidate {
        cluster: k,
        spacing: t,
        pilots: vec![p_tr; k],
        data: vec![flat_data(prob, k, t, p_tr); t - k],
        rate,
    }))
}

fn data_allocation(prob: &PolicyProblem, t: usize, pilots: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
    let budget = prob.budget(t) - pilots.iter().sum::<f64>();
    if budget < -1e-12 * prob.budget(t) {
        return Ok(None);
    }
    let (_, profile) = prob.profile(t, pilots.to_vec())?;
    let data = allocate_data(prob, profile.variances(), budget.max(0.0));
    let rate = rate_of(prob, t, &data, &profile);
    Ok(rate.is_finite().then_some((data, rate)))
}

fn policy_iii_at(prob: &PolicyProblem, k: usize, t: usize, p_tr: f64) -> Result<Option<Candidate>> {
    Ok(data_allocation(prob, t, &vec![p_tr; k])?.map(|(data, rate)| Candidate {
        cluster: k,
        spacing: t,
        pilots: vec![p_tr; k],
        data,
        rate,
    }))
}

fn policy_iii_frame(prob: &PolicyProblem, k: usize, t: usize) -> Result<Option<Candidate>> {
    let hi = prob.pilot_cap(k, t);
    let g = |p_tr: f64| -> Result<f64> {
        Ok(data_allocation(prob, t, &vec![p_tr; k])?.map_or(f64::NEG_INFINITY, |(_, r)| r))
    };
    let (p_tr, rate) = pilot_power_search(hi, &[prob.p_avg], g)?;
    if !rate.is_finite() {
        return Ok(None);
    }
    policy_iii_at(prob, k, t, p_tr)
}

/// Pairwise ascent over the pilot powers, with the data re-allocated for each trial.
fn pilot_ascent(prob: &PolicyProblem, start: Candidate) -> Result<Candidate> {
    let k = start.cluster;
    let t = start.spacing;
    let cap = prob.papr_cap.map(|c| c * prob.p_avg).unwrap_or(f64::INFINITY);
    let mut best = start;
    let mut delta = best.pilots.iter().sum::<f64>().max(prob.p_avg) / (4.0 * k as f64);
    let min_delta = 1e-5 * prob.p_avg;
    while delta >= min_delta {
        let mut trial_best: Option<Candidate> = None;
        let mut moves: Vec<Vec<f64>> = Vec::new();
        for s in 0..k {
            for sign in [1.0, -1.0] {
                let mut p = best.pilots.clone();
                p[s] += sign * delta;
                moves.push(p);
            }
            if cap.is_finite() && best.pilots[s] < cap {
                let mut p = best.pilots.clone();
                p[s] = cap;
                moves.push(p);
            }
            for d in 0..k {
                if d != s {
                    let mut p = best.pilots.clone();
                    p[s] -= delta;
                    p[d] += delta;
                    moves.push(p);
                }
            }
        }
        for mut p in moves {
            if p.iter().any(|&x| x < -1e-15 || x > cap) {
                continue;
            }
            for x in p.iter_mut() {
                *x = x.max(0.0);
            }
            if p.iter().all(|&x| x == 0.0) {
                continue;
            }
            if let Some((data, rate)) = data_allocation(prob, t, &p)? {
                let c = Candidate {
                    cluster: k,
                    spacing: t,
                    pilots: p,
                    data,
                    rate,
                };
                if trial_best.as_ref().map_or(true, |b| c.rate > b.rate) {
                    trial_best = Some(c);
                }
            }
        }
        match trial_best {
            Some(c) if c.rate > best.rate + TRANSFER_TOL => best = c,
            _ => delta *= 0.5,
        }
    }
    Ok(best)
}

fn policy_iv_frame(prob: &PolicyProblem, k: usize, t: usize) -> Result<Option<Candidate>> {
    match policy_iii_frame(prob, k, t)? {
        Some(start) => pilot_ascent(prob, start).map(Some),
        None => Ok(None),
    }
}

fn finish(
    prob: &PolicyProblem,
    policy: PolicyId,
    best: Option<Candidate>,
    best_by_cluster: Vec<ClusterBest>,
) -> Result<PolicyResult> {
    let c = best.ok_or_else(|| Error::InvalidSearch("no feasible frame in the search range".into()))?;
    let (pattern, profile) = prob.profile(c.spacing, c.pilots)?;
    let plan = FramePlan::new(pattern, c.data)?;
    let per_slot_inputs = if prob.with_inputs {
        let opt = IsubOptimizer::new(QuadratureSpec::default(), prob.seed);
        plan.data_powers
            .iter()
            .zip(profile.variances())
            .map(|(&p, &v)| opt.optimize(p, v, prob.noise_var).map(|pt| pt.input))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(PolicyResult {
        policy,
        plan,
        profile,
        rate: c.rate,
        rate_unit: prob.grid.rate_unit(),
        per_slot_inputs,
        baseline_rate: no_training_baseline(prob.p_avg, prob.noise_var, prob.grid)?,
        best_by_cluster,
    })
}

fn clusters(prob: &PolicyProblem) -> Vec<usize> {
    (prob.k_min..=prob.k_max).collect()
}

fn seed_candidate(seed: Option<&PolicyResult>) -> Option<(usize, usize, Vec<f64>)> {
    seed.map(|s| (s.cluster(), s.spacing(), s.plan.pattern.pilot_powers().to_vec()))
}

/// Equal power on every slot; exhaustive over `(k, T)`.
pub fn optimize_policy_i(prob: &PolicyProblem) -> Result<PolicyResult> {
    prob.validate()?;
    let (best, by_k) = search(prob, &clusters(prob), |k, t| policy_i_frame(prob, k, t))?;
    finish(prob, PolicyId::I, best, by_k)
}

/// Flat pilot and flat data power, pilot power line-searched per `(k, T)`.
pub fn optimize_policy_ii(prob: &PolicyProblem) -> Result<PolicyResult> {
    prob.validate()?;
    let (best, by_k) = search(prob, &clusters(prob), |k, t| policy_ii_frame(prob, k, t))?;
    finish(prob, PolicyId::II, best, by_k)
}

/// Flat pilot power, per-slot data power. `seed` adds its `(k, T, P_tr)` as a candidate.
pub fn optimize_policy_iii(prob: &PolicyProblem, seed: Option<&PolicyResult>) -> Result<PolicyResult> {
    prob.validate()?;
    let (mut best, by_k) = search(prob, &clusters(prob), |k, t| policy_iii_frame(prob, k, t))?;
    if let Some((k, t, pilots)) = seed_candidate(seed) {
        if (prob.k_min..=prob.k_max).contains(&k) && pilots.iter().all(|&p| p == pilots[0]) {
            if let Some(c) = policy_iii_at(prob, k, t, pilots[0])? {
                pick(&mut best, c);
            }
        }
    }
    finish(prob, PolicyId::III, best, by_k)
}

/// Per-slot pilot and data power. `seed` is refined by pilot ascent and kept as a candidate.
///
/// For causal Gauss-Markov estimation without a peak constraint the optimal
/// cluster puts all pilot power on its last pilot, so only `k = 1` is searched.
pub fn optimize_policy_iv(prob: &PolicyProblem, seed: Option<&PolicyResult>) -> Result<PolicyResult> {
    prob.validate()?;
    let (mut best, by_k) = if prob.theorem_shortcut() {
        search(prob, &[1], |k, t| policy_iii_frame(prob, k, t))?
    } else {
        search(prob, &clusters(prob), |k, t| policy_iv_frame(prob, k, t))?
    };
    if let Some((k, t, pilots)) = seed_candidate(seed) {
        if (prob.k_min..=prob.k_max).contains(&k) {
            if let Some((data, rate)) = data_allocation(prob, t, &pilots)? {
                let start = Candidate {
                    cluster: k,
                    spacing: t,
                    pilots,
                    data,
                    rate,
                };
                pick(&mut best, pilot_ascent(prob, start)?);
            }
        }
    }
    finish(prob, PolicyId::IV, best, by_k)
}

/// Runs the requested policies in order, seeding each with the previous optimum.
pub fn optimize_all(prob: &PolicyProblem, policies: &[PolicyId]) -> Result<Vec<PolicyResult>> {
    let mut out: Vec<PolicyResult> = Vec::new();
    let mut wanted = policies.to_vec();
    wanted.sort();
    wanted.dedup();
    for id in wanted {
        let seed = out.last();
        let r = match id {
            PolicyId::I => optimize_policy_i(prob)?,
            PolicyId::II => optimize_policy_ii(prob)?,
            PolicyId::III => optimize_policy_iii(prob, seed)?,
            PolicyId::IV => optimize_policy_iv(prob, seed)?,
        };
        out.push(r);
    }
    Ok(out)
}

/// Percent gains: Policy I against its best one-pilot frame, the others against Policy I.
pub fn percent_improvement(result: &PolicyResult, policy_i: Option<&PolicyResult>) -> Option<f64> {
    let reference = match result.policy {
        PolicyId::I => result.one_pilot_rate()?,
        _ => policy_i?.rate,
    };
    (reference > 0.0).then(|| 100.0 * (result.rate - reference) / reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_grid(c: f64) -> IsubGrid {
        IsubGrid::new(vec![0.0, 1.0, 10.0], vec![0.0, 1.0], vec![0.0, 0.0, c, c, c, c], 1.0, RateUnit::Nats).unwrap()
    }

    /// Rate `P (1 - v) / 2`, linear in both coordinates so interpolation is exact.
    fn linear_grid() -> IsubGrid {
        IsubGrid::new(
            vec![0.0, 10.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0, 5.0, 0.0],
            1.0,
            RateUnit::Nats,
        )
        .unwrap()
    }

    #[test]
    fn policy_id_parsing() {
        assert_eq!("3".parse::<PolicyId>().unwrap(), PolicyId::III);
        assert_eq!("iv".parse::<PolicyId>().unwrap(), PolicyId::IV);
        assert!("5".parse::<PolicyId>().is_err());
        assert_eq!(PolicyId::II.number(), 2);
    }

    #[test]
    fn frame_rate_arithmetic() {
        let g = flat_grid(0.3);
        let m = FadingModel::gauss_markov(0.9).unwrap();
        let pat = PilotPattern::uniform(4, 1, EstimationMode::Causal, 1.0).unwrap();
        let plan = FramePlan::new(pat.clone(), vec![2.0, 5.0, 1.0]).unwrap();
        assert!((frame_rate(&plan, &m, 1.0, &g).unwrap() - 0.9 / 4.0).abs() < 1e-15);
        let zero = FramePlan::new(pat.clone(), vec![0.0; 3]).unwrap();
        assert_eq!(frame_rate(&zero, &m, 1.0, &g).unwrap(), 0.0);
        let over = FramePlan::new(pat, vec![11.0, 0.0, 0.0]).unwrap();
        assert!(matches!(frame_rate(&over, &m, 1.0, &g), Err(Error::OutOfGrid { .. })));
        assert!(frame_rate(&zero, &m, 0.5, &g).is_err());
    }

    #[test]
    fn frame_plan_validation() {
        let pat = PilotPattern::uniform(4, 1, EstimationMode::Causal, 1.0).unwrap();
        assert!(FramePlan::new(pat.clone(), vec![1.0; 2]).is_err());
        assert!(FramePlan::new(pat, vec![1.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn allocation_favours_reliable_slots() {
        let g = linear_grid();
        let m = FadingModel::gauss_markov(0.9).unwrap();
        let prob = PolicyProblem::new(m, EstimationMode::Causal, 1.0, 1.0, &g);
        let vs = [0.1, 0.5, 0.3];
        let p = allocate_data(&prob, &vs, 3.0);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        // Linear objective: everything goes to the slot with the smallest v.
        assert!(p[0] > 2.999 && p[1] < 1e-6 && p[2] < 1e-6, "{p:?}");
    }

    #[test]
    fn problem_validation() {
        let g = flat_grid(0.1);
        let m = FadingModel::gauss_markov(0.9).unwrap();
        let mut prob = PolicyProblem::new(m, EstimationMode::Causal, 1.0, 1.0, &g);
        assert!(prob.validate().is_ok());
        prob.papr_cap = Some(0.0);
        assert!(matches!(optimize_policy_ii(&prob), Err(Error::InvalidSearch(_))));
        prob.papr_cap = None;
        prob.t_max = 6;
        assert!(prob.validate().is_err());
        prob.t_max = 20;
        prob.noise_var = 0.5;
        assert!(matches!(prob.validate(), Err(Error::NoiseMismatch { .. })));
    }

    #[test]
    fn tie_break_prefers_small_frames() {
        let mk = |k, t, p: f64, r| Candidate {
            cluster: k,
            spacing: t,
            pilots: vec![p; k],
            data: vec![],
            rate: r,
        };
        assert!(mk(1, 10, 1.0, 0.5).beats(&mk(2, 5, 1.0, 0.5)));
        assert!(mk(1, 5, 1.0, 0.5).beats(&mk(1, 6, 1.0, 0.5)));
        assert!(mk(1, 5, 0.5, 0.5).beats(&mk(1, 5, 1.0, 0.5)));
        assert!(mk(3, 9, 1.0, 0.6).beats(&mk(1, 5, 1.0, 0.5)));
        assert!(!mk(1, 5, 1.0, 0.5).beats(&mk(1, 5, 1.0, 0.5)));
    }

    #[test]
    fn white_fading_makes_training_useless() {
        let g = flat_grid(0.2);
        let m = FadingModel::gauss_markov(0.0).unwrap();
        let mut prob = PolicyProblem::new(m, EstimationMode::Causal, 1.0, 1.0, &g);
        prob.t_max = 30;
        let r = optimize_policy_i(&prob).unwrap();
        assert!(r.rate < r.baseline_rate);
        assert!(!r.training_beneficial());
        assert!(r.profile.variances().iter().all(|&v| v == 1.0));
    }
}
