//! MMSE (equivalently LLSE) channel-estimation error variances for a pilot pattern.
//!
//! The receiver estimates `R_j` for the data slots `j = k..T-1` from the received
//! pilots `Y_s = sqrt(P_s) R_s + N_s`. Only the error variance of the estimate is
//! needed, and it depends on the fading autocorrelation, the pilot powers and the
//! noise level alone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::FadingModel;

const CLAMP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationMode {
    /// Only the leading cluster of the current frame.
    Causal,
    /// The leading cluster plus the next frame's cluster.
    NonCausal,
}

impl std::fmt::Display for EstimationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimationMode::Causal => f.write_str("causal"),
            EstimationMode::NonCausal => f.write_str("noncausal"),
        }
    }
}

impl std::str::FromStr for EstimationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "causal" => Ok(EstimationMode::Causal),
            "noncausal" | "non-causal" => Ok(EstimationMode::NonCausal),
            other => Err(format!("unknown estimation mode '{other}'")),
        }
    }
}

/// Frame geometry: `k` leading pilots in a frame of `T` symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotPattern {
    spacing: usize,
    mode: EstimationMode,
    pilot_powers: Vec<f64>,
}

impl PilotPattern {
    /// The cluster size is `pilot_powers.len()`.
    pub fn new(spacing: usize, mode: EstimationMode, pilot_powers: Vec<f64>) -> Result<Self> {
        let k = pilot_powers.len();
        if k == 0 {
            return Err(Error::InvalidPattern("at least one pilot is required".into()));
        }
        if k >= spacing {
            return Err(Error::InvalidPattern(format!(
                "cluster size {k} must be smaller than the spacing {spacing}"
            )));
        }
        if let Some(&p) = pilot_powers.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::NegativePower(p));
        }
        Ok(Self {
            spacing,
            mode,
            pilot_powers,
        })
    }

    pub fn uniform(spacing: usize, cluster: usize, mode: EstimationMode, power: f64) -> Result<Self> {
        Self::new(spacing, mode, vec![power; cluster])
    }

    pub fn spacing(&self) -> usize {
        self.spacing
    }

    pub fn cluster(&self) -> usize {
        self.pilot_powers.len()
    }

    pub fn mode(&self) -> EstimationMode {
        self.mode
    }

    pub fn pilot_powers(&self) -> &[f64] {
        &self.pilot_powers
    }

    pub fn data_slots(&self) -> usize {
        self.spacing - self.cluster()
    }

    pub fn with_pilot_powers(&self, pilot_powers: Vec<f64>) -> Result<Self> {
        Self::new(self.spacing, self.mode, pilot_powers)
    }
}

/// Pilot indices used to estimate the data slots of one frame.
pub fn pilot_index_set(pattern: &PilotPattern) -> Vec<i64> {
    let k = pattern.cluster() as i64;
    let t = pattern.spacing() as i64;
    let mut idx: Vec<i64> = (0..k).collect();
    if pattern.mode() == EstimationMode::NonCausal {
        idx.extend(t..t + k);
    }
    idx
}

/// Estimation error variances `v_j` for data slots `j = k..T-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    first_slot: usize,
    variances: Vec<f64>,
}

impl ErrorProfile {
    pub fn new(first_slot: usize, variances: Vec<f64>) -> Self {
        Self {
            first_slot,
            variances,
        }
    }

    /// Index of the first data slot (the cluster size `k`).
    pub fn first_slot(&self) -> usize {
        self.first_slot
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Variance at absolute frame slot `j`, if it is a data slot.
    pub fn at(&self, j: usize) -> Option<f64> {
        j.checked_sub(self.first_slot)
            .and_then(|i| self.variances.get(i).copied())
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.variances
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i + self.first_slot, v))
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v < 0.0 && v >= -CLAMP_SLACK {
        0.0
    } else if v > 1.0 && v <= 1.0 + CLAMP_SLACK {
        1.0
    } else {
        v
    }
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var > 0.0 && noise_var.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveNoise(noise_var))
    }
}

/// Factorized observation covariance `D A D + sigma^2 I` over the active pilots.
///
/// Zero-power pilots carry no information and are removed before factoring.
#[derive(Debug, Clone)]
pub struct PilotSystem {
    model: FadingModel,
    indices: Vec<i64>,
    amplitudes: Vec<f64>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl PilotSystem {
    pub fn new(model: &FadingModel, indices: &[i64], powers: &[f64], noise_var: f64) -> Result<Self> {
        check_noise(noise_var)?;
        assert_eq!(indices.len(), powers.len(), "one power per pilot index");
        let (indices, amplitudes): (Vec<i64>, Vec<f64>) = indices
            .iter()
            .zip(powers)
            .filter(|(_, p)| **p > 0.0)
            .map(|(&i, &p)| (i, p.sqrt()))
            .unzip();
        let chol = if indices.is_empty() {
            None
        } else {
            let a = model.autocovariance_matrix(&indices)?;
            let n = indices.len();
            let mut m = DMatrix::from_fn(n, n, |r, c| amplitudes[r] * a[(r, c)] * amplitudes[c]);
            for d in 0..n {
                m[(d, d)] += noise_var;
            }
            Some(m.cholesky().ok_or(Error::NotPositiveDefinite)?)
        };
        Ok(Self {
            model: *model,
            indices,
            amplitudes,
            chol,
        })
    }

    pub fn for_pattern(model: &FadingModel, pattern: &PilotPattern, noise_var: f64) -> Result<Self> {
        let idx = pilot_index_set(pattern);
        let mut powers = pattern.pilot_powers().to_vec();
        if pattern.mode() == EstimationMode::NonCausal {
            powers.extend_from_slice(pattern.pilot_powers());
        }
        Self::new(model, &idx, &powers, noise_var)
    }

    /// `1 - c^T (D A D + sigma^2 I)^{-1} c` with `c_s = sqrt(P_s) phi(j - s)`.
    pub fn error_variance(&self, j: i64) -> f64 {
        let Some(chol) = &self.chol else {
            return 1.0;
        };
        let c = DVector::from_iterator(
            self.indices.len(),
            self.indices
                .iter()
                .zip(&self.amplitudes)
                .map(|(&s, &a)| a * self.model.autocorrelation(j - s)),
        );
        let y = chol
            .l_dirty()
            .solve_lower_triangular(&c)
            .expect("Cholesky factor has a positive diagonal");
        clamp_unit(1.0 - y.norm_squared())
    }
}

/// Generic LLSE error-variance profile for any fading model and estimation mode.
pub fn error_variance_profile(
    model: &FadingModel,
    pattern: &PilotPattern,
    noise_var: f64,
) -> Result<ErrorProfile> {
    let sys = PilotSystem::for_pattern(model, pattern, noise_var)?;
    let k = pattern.cluster();
    let variances = (k..pattern.spacing())
        .map(|j| sys.error_variance(j as i64))
        .collect();
    Ok(ErrorProfile::new(k, variances))
}

/// Quadratic form `V^T D (D A D + sigma^2 I)^{-1} D V` of the Gauss-Markov causal
/// estimator, with `V = (alpha^{k-1}, ..., alpha, 1)`. Equals `1 - v_{k-1}`.
pub fn causal_gain_gm(alpha: f64, pilot_powers: &[f64], noise_var: f64) -> Result<f64> {
    check_noise(noise_var)?;
    let model = FadingModel::gauss_markov(alpha)?;
    let k = pilot_powers.len();
    if let Some(&p) = pilot_powers.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::NegativePower(p));
    }
    if k == 0 || pilot_powers.iter().all(|&p| p == 0.0) {
        return Ok(0.0);
    }
    let idx: Vec<i64> = (0..k as i64).collect();
    let a = model.autocovariance_matrix(&idx)?;
    let d: Vec<f64> = pilot_powers.iter().map(|p| p.sqrt()).collect();
    let mut m = DMatrix::from_fn(k, k, |r, c| d[r] * a[(r, c)] * d[c]);
    for i in 0..k {
        m[(i, i)] += noise_var;
    }
    let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let dv = DVector::from_fn(k, |i, _| d[i] * alpha.powi((k - 1 - i) as i32));
    let sol = chol.solve(&dv);
    Ok(dv.dot(&sol))
}

/// Closed-form causal profile for Gauss-Markov fading:
/// `v_j = 1 - alpha^{2(j-k+1)} * causal_gain_gm(..)`.
pub fn causal_error_variance_gm(
    alpha: f64,
    pattern: &PilotPattern,
    noise_var: f64,
) -> Result<ErrorProfile> {
    if pattern.mode() != EstimationMode::Causal {
        return Err(Error::InvalidPattern(
            "closed-form Gauss-Markov profile requires causal estimation".into(),
        ));
    }
    let gain = causal_gain_gm(alpha, pattern.pilot_powers(), noise_var)?;
    let k = pattern.cluster();
    let a2 = alpha * alpha;
    let mut decay = a2;
    let variances = (k..pattern.spacing())
        .map(|_| {
            let v = clamp_unit(1.0 - decay * gain);
            decay *= a2;
            v
        })
        .collect();
    Ok(ErrorProfile::new(k, variances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gm(a: f64) -> FadingModel {
        FadingModel::gauss_markov(a).unwrap()
    }

    #[test]
    fn index_sets() {
        let p = PilotPattern::uniform(10, 2, EstimationMode::Causal, 1.0).unwrap();
        assert_eq!(pilot_index_set(&p), vec![0, 1]);
        let p = PilotPattern::uniform(10, 2, EstimationMode::NonCausal, 1.0).unwrap();
        assert_eq!(pilot_index_set(&p), vec![0, 1, 10, 11]);
        let p = PilotPattern::uniform(5, 1, EstimationMode::Causal, 1.0).unwrap();
        assert_eq!(pilot_index_set(&p), vec![0]);
    }

    #[test]
    fn pattern_validation() {
        assert!(PilotPattern::new(3, EstimationMode::Causal, vec![]).is_err());
        assert!(PilotPattern::new(3, EstimationMode::Causal, vec![1.0; 3]).is_err());
        assert_eq!(
            PilotPattern::new(5, EstimationMode::Causal, vec![1.0, -0.5]),
            Err(Error::NegativePower(-0.5))
        );
    }

    #[test]
    fn scalar_pilot_matches_closed_form() {
        let p = PilotPattern::uniform(4, 1, EstimationMode::Causal, 1.0).unwrap();
        let prof = error_variance_profile(&gm(0.9), &p, 1.0).unwrap();
        assert_abs_diff_eq!(prof.at(1).unwrap(), 0.595, epsilon = 1e-12);
        let cf = causal_error_variance_gm(0.9, &p, 1.0).unwrap();
        assert_abs_diff_eq!(cf.at(2).unwrap(), 1.0 - 0.9f64.powi(4) * 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.at(2).unwrap(), 0.67195, epsilon = 1e-12);
        assert_eq!(prof.at(0), None);
        assert_eq!(prof.at(4), None);
    }

    #[test]
    fn white_fading_gives_no_information() {
        for mode in [EstimationMode::Causal, EstimationMode::NonCausal] {
            let p = PilotPattern::new(7, mode, vec![2.0, 0.5, 3.0]).unwrap();
            let prof = error_variance_profile(&gm(0.0), &p, 0.3).unwrap();
            assert!(prof.variances().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn zero_power_pilots() {
        let p = PilotPattern::new(6, EstimationMode::Causal, vec![0.0, 0.0]).unwrap();
        let prof = error_variance_profile(&gm(0.95), &p, 1.0).unwrap();
        assert!(prof.variances().iter().all(|&v| v == 1.0));
        let cf = causal_error_variance_gm(0.95, &p, 1.0).unwrap();
        assert!(cf.variances().iter().all(|&v| v == 1.0));
        // A zero-power pilot is equivalent to an absent one.
        let a = PilotPattern::new(6, EstimationMode::Causal, vec![0.0, 2.0]).unwrap();
        let b = error_variance_profile(&gm(0.95), &a, 1.0).unwrap();
        let sys = PilotSystem::new(&gm(0.95), &[1], &[2.0], 1.0).unwrap();
        for (j, v) in b.iter() {
            assert_abs_diff_eq!(v, sys.error_variance(j as i64), epsilon = 1e-15);
        }
    }

    #[test]
    fn noise_must_be_positive() {
        let p = PilotPattern::uniform(4, 1, EstimationMode::Causal, 1.0).unwrap();
        assert_eq!(
            error_variance_profile(&gm(0.9), &p, 0.0),
            Err(Error::NonPositiveNoise(0.0))
        );
        assert!(causal_error_variance_gm(0.9, &p, -1.0).is_err());
    }

    #[test]
    fn noncausal_requires_generic_path() {
        let p = PilotPattern::uniform(4, 1, EstimationMode::NonCausal, 1.0).unwrap();
        assert!(causal_error_variance_gm(0.9, &p, 1.0).is_err());
    }

    #[test]
    fn two_pilot_instance_matches_explicit_inverse() {
        let (alpha, s2) = (0.95, 0.5);
        let p = PilotPattern::uniform(6, 2, EstimationMode::Causal, 1.0).unwrap();
        let prof = error_variance_profile(&gm(alpha), &p, s2).unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[1.0 + s2, alpha, alpha, 1.0 + s2]);
        let inv = cov.try_inverse().unwrap();
        for j in 2..6 {
            let c = DVector::from_vec(vec![alpha.powi(j), alpha.powi(j - 1)]);
            let v = 1.0 - (c.transpose() * &inv * &c)[(0, 0)];
            assert_abs_diff_eq!(prof.at(j as usize).unwrap(), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_equals_one_minus_last_pilot_variance() {
        let powers = [0.3, 1.7, 0.9];
        let g = causal_gain_gm(0.8, &powers, 0.6).unwrap();
        let sys = PilotSystem::new(&gm(0.8), &[0, 1, 2], &powers, 0.6).unwrap();
        assert_abs_diff_eq!(g, 1.0 - sys.error_variance(2), epsilon = 1e-12);
        assert_abs_diff_eq!(
            causal_gain_gm(0.5, &[2.0], 1.0).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-14
        );
    }
}
