//! Binary-input mutual information through an imperfectly estimated Rayleigh channel.
//!
//! Given the estimate `R^ = r` with error variance `v`, the output is
//! `Y | x ~ CN(r x, v |x|^2 + sigma^2)`. With real mass points the law is
//! rotation invariant, so only `|r|` matters, and `R^ ~ CN(0, 1 - v)` makes
//! `|R^|^2` exponential with mean `1 - v`.
//!
//! Mutual information is evaluated as `H(X) - E[H(X | Y)]`, integrating the
//! posterior entropy in the coordinates of the narrower output component with a
//! tensor Gauss-Hermite rule. The expectation over `|R^|^2` uses a Gauss-Laguerre
//! rule whose scale is matched to the saturation rate of the conditional MI.

mod grid;
mod optimize;

pub use grid::{build_grid, build_grid_with, GridSpec, IsubGrid};
pub use optimize::{optimize_isub, IsubOptimizer, IsubPoint};

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gauss_laguerre};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RateUnit {
    #[default]
    Bits,
    Nats,
}

impl RateUnit {
    /// Multiplier converting nats into this unit.
    pub fn from_nats(self) -> f64 {
        match self {
            RateUnit::Bits => std::f64::consts::LOG2_E,
            RateUnit::Nats => 1.0,
        }
    }
}

impl std::fmt::Display for RateUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateUnit::Bits => "bits",
            RateUnit::Nats => "nats",
        })
    }
}

impl std::str::FromStr for RateUnit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bits" => Ok(RateUnit::Bits),
            "nats" => Ok(RateUnit::Nats),
            other => Err(format!("unknown rate unit '{other}'")),
        }
    }
}

/// Two real mass points `m1 < 0 < m2`, with `m1` sent with probability `p1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryInput {
    m1: f64,
    m2: f64,
    p1: f64,
}

impl BinaryInput {
    pub fn new(m1: f64, m2: f64, p1: f64) -> Result<Self> {
        if !(m1 < 0.0 && m2 > 0.0 && m1.is_finite() && m2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mass points must satisfy m1 < 0 < m2, got ({m1}, {m2})"
            )));
        }
        if !(p1 > 0.0 && p1 < 1.0) {
            return Err(Error::InvalidInput(format!("p1 must lie in (0, 1), got {p1}")));
        }
        Ok(Self { m1, m2, p1 })
    }

    /// The all-zero input used when no power is available.
    pub const fn silent() -> Self {
        Self {
            m1: 0.0,
            m2: 0.0,
            p1: 0.5,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.m1 == 0.0 && self.m2 == 0.0
    }

    /// Input meeting `p1 m1^2 + (1 - p1) m2^2 = power` with `m1 = -ratio * sqrt(power)`.
    pub fn with_power(power: f64, p1: f64, ratio: f64) -> Result<Self> {
        if !(power > 0.0) {
            return Err(Error::NegativePower(power));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "|m1| / sqrt(P) must lie in (0, 1], got {ratio}"
            )));
        }
        let m1 = -ratio * power.sqrt();
        let m2 = ((power - p1 * m1 * m1) / (1.0 - p1)).max(0.0).sqrt();
        Self::new(m1, m2, p1)
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn power(&self) -> f64 {
        self.p1 * self.m1 * self.m1 + (1.0 - self.p1) * self.m2 * self.m2
    }

    /// Entropy of the input in nats.
    pub fn entropy(&self) -> f64 {
        binary_entropy(self.p1)
    }
}

pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Quadrature resolution for the MI integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss-Hermite points per output dimension.
    pub output_nodes: usize,
    /// Gauss-Laguerre points over the squared estimate magnitude.
    pub magnitude_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            output_nodes: 24,
            magnitude_nodes: 16,
        }
    }
}

impl QuadratureSpec {
    pub fn doubled(self) -> Self {
        Self {
            output_nodes: 2 * self.output_nodes,
            magnitude_nodes: 2 * self.magnitude_nodes,
        }
    }
}

/// Precomputed nodes for a [`QuadratureSpec`].
#[derive(Debug, Clone)]
pub struct MiQuadrature {
    spec: QuadratureSpec,
    /// Full Gauss-Hermite rule for the in-phase axis.
    inphase: Vec<(f64, f64)>,
    /// Non-negative half of the rule for the quadrature axis, weights folded.
    quadrature_half: Vec<(f64, f64)>,
    laguerre: Vec<(f64, f64)>,
}

impl MiQuadrature {
    pub fn new(spec: QuadratureSpec) -> Self {
        assert!(spec.output_nodes >= 2 && spec.magnitude_nodes >= 1);
        let gh = gauss_hermite(spec.output_nodes);
        let inphase: Vec<(f64, f64)> = gh.iter().collect();
        let quadrature_half = gh
            .iter()
            .filter(|(x, _)| *x >= 0.0)
            .map(|(x, w)| if x == 0.0 { (x, w) } else { (x, 2.0 * w) })
            .collect();
        let laguerre = gauss_laguerre(spec.magnitude_nodes).iter().collect();
        Self {
            spec,
            inphase,
            quadrature_half,
            laguerre,
        }
    }

    pub fn spec(&self) -> QuadratureSpec {
        self.spec
    }

    /// Shared instance for the default resolution.
    pub fn standard() -> &'static MiQuadrature {
        static STD: OnceLock<MiQuadrature> = OnceLock::new();
        STD.get_or_init(|| MiQuadrature::new(QuadratureSpec::default()))
    }

    /// Shared instance with a doubled output rule, for standalone conditional MI.
    pub fn precise() -> &'static MiQuadrature {
        static PRECISE: OnceLock<MiQuadrature> = OnceLock::new();
        PRECISE.get_or_init(|| {
            let base = QuadratureSpec::default();
            MiQuadrature::new(QuadratureSpec {
                output_nodes: 2 * base.output_nodes,
                ..base
            })
        })
    }
}

fn check_channel(v: f64, noise_var: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VarianceOutOfRange(v));
    }
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::NonPositiveNoise(noise_var));
    }
    Ok(())
}

/// `(1 + w) ln(1 + w) - w ln w` for `w = exp(q)`: the posterior entropy scaled by
/// the mixture-to-narrow-component density ratio.
#[inline]
fn scaled_posterior_entropy(q: f64) -> f64 {
    if q > 0.0 {
        let t = (-q).exp();
        let l = t.ln_1p();
        let ratio = if t > 0.0 { l / t } else { 1.0 };
        q + l + ratio
    } else {
        let w = q.exp();
        (1.0 + w) * w.ln_1p() - w * q
    }
}

/// Conditional MI in nats for real mass points at estimate magnitude `rho`.
fn conditional_mi_nats(input: &BinaryInput, rho: f64, v: f64, noise_var: f64, quad: &MiQuadrature) -> f64 {
    let h = input.entropy();
    if h == 0.0 || input.is_silent() {
        return 0.0;
    }
    let m = [input.m1, input.m2];
    let p = [input.p1, 1.0 - input.p1];
    let s = [v * m[0] * m[0] + noise_var, v * m[1] * m[1] + noise_var];
    let (i, j) = if s[0] <= s[1] { (0, 1) } else { (1, 0) };
    let (si, sj) = (s[i], s[j]);
    let offset = (p[j] * si / (p[i] * sj)).ln();
    let shift = rho * (m[i] - m[j]);
    let scale = si.sqrt();
    let inv_sj = 1.0 / sj;
    let curvature = 1.0 - si / sj;

    let mut acc = 0.0;
    for &(x, wx) in &quad.inphase {
        let d = shift + scale * x;
        let qa = offset + x * x - d * d * inv_sj;
        let mut row = 0.0;
        for &(y, wy) in &quad.quadrature_half {
            row += wy * scaled_posterior_entropy(qa + curvature * y * y);
        }
        acc += wx * row;
    }
    let cond_entropy = p[i] * acc / std::f64::consts::PI;
    (h - cond_entropy).clamp(0.0, h)
}

/// `I(X; Y | R^ = r)` in nats for `|r| = est_magnitude`.
pub fn conditional_mi(input: &BinaryInput, est_magnitude: f64, v: f64, noise_var: f64) -> Result<f64> {
    conditional_mi_with(input, est_magnitude, v, noise_var, MiQuadrature::precise())
}

pub fn conditional_mi_with(
    input: &BinaryInput,
    est_magnitude: f64,
    v: f64,
    noise_var: f64,
    quad: &MiQuadrature,
) -> Result<f64> {
    check_channel(v, noise_var)?;
    if !(est_magnitude >= 0.0 && est_magnitude.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "estimate magnitude must be non-negative, got {est_magnitude}"
        )));
    }
    Ok(conditional_mi_nats(input, est_magnitude, v, noise_var, quad))
}

fn expected_mi_nats(input: &BinaryInput, v: f64, noise_var: f64, quad: &MiQuadrature) -> f64 {
    let h = input.entropy();
    if h == 0.0 || input.is_silent() {
        return 0.0;
    }
    if v >= 1.0 {
        return conditional_mi_nats(input, 0.0, 1.0, noise_var, quad);
    }
    let spread = 1.0 - v;
    let smax = v * input.m1.max(-input.m1).max(input.m2).powi(2) + noise_var;
    let gap = input.m2 - input.m1;
    // The MI shortfall decays roughly like exp(-rate * tau); rescaling tau by
    // 1 + rate makes the Laguerre integrand slowly varying.
    let lambda = 1.0 + 0.5 * spread * gap * gap / smax;
    let mut acc = 0.0;
    for &(u, w) in &quad.laguerre {
        let tau = u / lambda;
        let rho = (spread * tau).sqrt();
        let shortfall = conditional_mi_nats(input, rho, v, noise_var, quad) - h;
        acc += (w.ln() + u - tau).exp() * shortfall;
    }
    (h + acc / lambda).clamp(0.0, h)
}

/// `E_{R^}[I(X; Y | R^)]` in nats with `R^ ~ CN(0, 1 - v)`.
pub fn expected_mi(input: &BinaryInput, v: f64, noise_var: f64) -> Result<f64> {
    expected_mi_with(input, v, noise_var, MiQuadrature::standard())
}

pub fn expected_mi_with(input: &BinaryInput, v: f64, noise_var: f64, quad: &MiQuadrature) -> Result<f64> {
    check_channel(v, noise_var)?;
    Ok(expected_mi_nats(input, v, noise_var, quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn near_deterministic_input_carries_nothing() {
        let x = BinaryInput::new(-1.0, 1.0, 1.0 - 1e-12).unwrap();
        assert!(conditional_mi(&x, 0.7, 0.2, 1.0).unwrap() <= 1e-10);
        assert!(expected_mi(&x, 0.2, 1.0).unwrap() <= 1e-10);
    }

    #[test]
    fn antipodal_without_csi_is_useless() {
        // Equal variances and zero means: the two output laws coincide.
        let x = BinaryInput::new(-1.0, 1.0, 0.5).unwrap();
        assert!(conditional_mi(&x, 0.0, 1.0, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn silent_input() {
        let z = BinaryInput::silent();
        assert_eq!(expected_mi(&z, 0.3, 1.0).unwrap(), 0.0);
        assert_eq!(conditional_mi(&z, 1.0, 0.3, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn full_error_collapses_to_zero_estimate() {
        let x = BinaryInput::new(-0.4, 2.0, 0.8).unwrap();
        assert_eq!(
            expected_mi(&x, 1.0, 0.5).unwrap(),
            conditional_mi_with(&x, 0.0, 1.0, 0.5, MiQuadrature::standard()).unwrap()
        );
    }

    #[test]
    fn argument_validation() {
        let x = BinaryInput::new(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(conditional_mi(&x, 0.0, 1.5, 1.0), Err(Error::VarianceOutOfRange(1.5)));
        assert_eq!(expected_mi(&x, -0.1, 1.0), Err(Error::VarianceOutOfRange(-0.1)));
        assert_eq!(expected_mi(&x, 0.5, 0.0), Err(Error::NonPositiveNoise(0.0)));
        assert!(conditional_mi(&x, -1.0, 0.5, 1.0).is_err());
        assert!(BinaryInput::new(0.0, 1.0, 0.5).is_err());
        assert!(BinaryInput::new(-1.0, 1.0, 1.0).is_err());
        assert!(BinaryInput::with_power(1.0, 0.5, 1.5).is_err());
    }

    #[test]
    fn with_power_meets_constraint() {
        let x = BinaryInput::with_power(2.5, 0.8, 0.3).unwrap();
        assert_relative_eq!(x.power(), 2.5, max_relative = 1e-14);
        assert!(x.m1() >= -2.5f64.sqrt() && x.m2() >= 2.5f64.sqrt());
    }

    #[test]
    fn perfect_csi_bpsk_matches_known_value() {
        // Coherent BPSK over Rayleigh fading, checked against a 1-D Gauss-Hermite
        // evaluation of the real-channel BPSK capacity.
        let x = BinaryInput::new(-1.0, 1.0, 0.5).unwrap();
        let rho: f64 = 0.8;
        let s2: f64 = 0.5;
        // Only the in-phase component is informative: I = ln2 - E[ln(1 + exp(-2 L))]
        // with L = 2 rho (rho + n) / s2 and n ~ N(0, s2/2).
        let gh = crate::quadrature::gauss_hermite(80);
        let sd = (s2 / 2.0).sqrt();
        let mut e = 0.0;
        for (z, w) in gh.iter() {
            let n = std::f64::consts::SQRT_2 * sd * z;
            let llr = 4.0 * rho * (rho + n) / s2;
            e += w * (-llr).exp().ln_1p();
        }
        let want = std::f64::consts::LN_2 - e / std::f64::consts::PI.sqrt();
        let got = conditional_mi(&x, rho, 0.0, s2).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-6);
    }
}
