//! Autocorrelation laws of the unit-variance fading process.
//!
//! Two models are supported: the stationary first-order Gauss-Markov process
//! `R_i = alpha R_{i-1} + Z_i` with `phi[l] = alpha^|l|`, and Jakes' model with
//! `phi[l] = J0(2 pi f_d T_s |l|)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Fading autocorrelation model. Both variants are normalized to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    GaussMarkov { alpha: f64 },
    Jakes { doppler_hz: f64, symbol_period_s: f64 },
}

impl FadingModel {
    pub fn gauss_markov(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidModel(format!(
                "Gauss-Markov alpha must lie in [0, 1), got {alpha}"
            )));
        }
        Ok(FadingModel::GaussMarkov { alpha })
    }

    pub fn jakes(doppler_hz: f64, symbol_period_s: f64) -> Result<Self> {
        if !(doppler_hz > 0.0 && doppler_hz.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "Doppler frequency must be positive, got {doppler_hz}"
            )));
        }
        if !(symbol_period_s > 0.0 && symbol_period_s.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "symbol period must be positive, got {symbol_period_s}"
            )));
        }
        Ok(FadingModel::Jakes {
            doppler_hz,
            symbol_period_s,
        })
    }

    /// Jakes' model parameterized by the symbol (sampling) rate `f_s = 1 / T_s`.
    pub fn jakes_from_rate(doppler_hz: f64, symbol_rate_hz: f64) -> Result<Self> {
        if !(symbol_rate_hz > 0.0) {
            return Err(Error::InvalidModel(format!(
                "symbol rate must be positive, got {symbol_rate_hz}"
            )));
        }
        Self::jakes(doppler_hz, 1.0 / symbol_rate_hz)
    }

    /// Re-checks the invariants; useful for values built through serde.
    pub fn validate(&self) -> Result<()> {
        match *self {
            FadingModel::GaussMarkov { alpha } => Self::gauss_markov(alpha).map(|_| ()),
            FadingModel::Jakes {
                doppler_hz,
                symbol_period_s,
            } => Self::jakes(doppler_hz, symbol_period_s).map(|_| ()),
        }
    }

    pub fn gauss_markov_alpha(&self) -> Option<f64> {
        match *self {
            FadingModel::GaussMarkov { alpha } => Some(alpha),
            FadingModel::Jakes { .. } => None,
        }
    }

    /// Normalized autocorrelation at integer lag; symmetric in `lag`.
    pub fn autocorrelation(&self, lag: i64) -> f64 {
        let lag = lag.unsigned_abs();
        match *self {
            FadingModel::GaussMarkov { alpha } => {
                if lag == 0 {
                    1.0
                } else {
                    alpha.powi(lag.min(i32::MAX as u64) as i32)
                }
            }
            FadingModel::Jakes {
                doppler_hz,
                symbol_period_s,
            } => {
                if lag == 0 {
                    1.0
                } else {
                    bessel_j0(2.0 * PI * doppler_hz * symbol_period_s * lag as f64)
                }
            }
        }
    }

    /// Autocovariance matrix of the fading samples at `indices`.
    pub fn autocovariance_matrix(&self, indices: &[i64]) -> Result<DMatrix<f64>> {
        let mut seen = indices.to_vec();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateIndex(w[0]));
        }
        let n = indices.len();
        Ok(DMatrix::from_fn(n, n, |m, k| {
            self.autocorrelation(indices[m] - indices[k])
        }))
    }
}

const SERIES_LIMIT: f64 = 12.0;

/// Zeroth-order Bessel function of the first kind.
///
/// Ascending power series for `|x| <= 12`, Hankel asymptotic expansion beyond.
/// Absolute error is below 1e-10 on `|x| <= 50`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && kf > q.sqrt() {
            break;
        }
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // a_k = prod_{j=1..k} (2j-1)^2 / (k! 8^k).
    // P = a_0 - a_2/x^2 + a_4/x^4 - ..., Q = -a_1/x + a_3/x^3 - ...
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut xpow = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..200usize {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= odd * odd / (8.0 * k as f64);
            xpow *= x;
        }
        let t = a / xpow;
        if t > last {
            break;
        }
        last = t;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * t;
        } else {
            q -= sign * t;
        }
        if t < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
