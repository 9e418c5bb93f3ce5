//! Maximization of the expected MI over binary inputs at a fixed power.
//!
//! The power constraint is imposed with equality, leaving two free parameters:
//! `p1` and `r = |m1| / sqrt(P)` in `(0, 1]`, with `m2` fixed by the budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{expected_mi_nats, BinaryInput, MiQuadrature, QuadratureSpec};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead_max, NelderMeadOptions};

pub const P1_MIN: f64 = 1e-4;
pub const P1_MAX: f64 = 1.0 - 1e-5;
pub const RATIO_MIN: f64 = 1e-6;

/// Optimal binary input and its rate (nats) at one `(P, v)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsubPoint {
    pub input: BinaryInput,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct IsubOptimizer {
    fine: MiQuadrature,
    coarse: MiQuadrature,
    seed: u64,
    restarts: usize,
}

impl Default for IsubOptimizer {
    fn default() -> Self {
        Self::new(QuadratureSpec::default(), 0)
    }
}

const COARSE_P1: [f64; 7] = [0.1, 0.3, 0.5, 0.65, 0.8, 0.9, 0.97];
const COARSE_RATIO: [f64; 6] = [0.02, 0.2, 0.4, 0.6, 0.8, 1.0];

impl IsubOptimizer {
    pub fn new(spec: QuadratureSpec, seed: u64) -> Self {
        let coarse = QuadratureSpec {
            output_nodes: (spec.output_nodes / 2).max(8),
            magnitude_nodes: (spec.magnitude_nodes / 2).max(6),
        };
        Self {
            fine: MiQuadrature::new(spec),
            coarse: MiQuadrature::new(coarse),
            seed,
            restarts: 3,
        }
    }

    pub fn quadrature(&self) -> &MiQuadrature {
        &self.fine
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Expected MI in nats of the equality-constrained input `(p1, r)`.
    pub fn objective(&self, power: f64, p1: f64, ratio: f64, v: f64, noise_var: f64) -> f64 {
        eval(power, p1, ratio, v, noise_var, &self.fine)
    }

    pub fn optimize(&self, power: f64, v: f64, noise_var: f64) -> Result<IsubPoint> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::NegativePower(power));
        }
        super::check_channel(v, noise_var)?;
        if power == 0.0 {
            return Ok(IsubPoint {
                input: BinaryInput::silent(),
                rate: 0.0,
            });
        }

        let coarse = |x: &[f64]| eval(power, x[0], x[1], v, noise_var, &self.coarse);
        let fine = |x: &[f64]| eval(power, x[0], x[1], v, noise_var, &self.fine);
        let lo = [P1_MIN, RATIO_MIN];
        let hi = [P1_MAX, 1.0];

        let mut starts: Vec<(f64, [f64; 2])> = Vec::with_capacity(COARSE_P1.len() * COARSE_RATIO.len() + 1);
        for &p1 in &COARSE_P1 {
            for &r in &COARSE_RATIO {
                starts.push((coarse(&[p1, r]), [p1, r]));
            }
        }
        starts.sort_by(|a, b| b.0.total_cmp(&a.0));
        starts.truncate(self.restarts.saturating_sub(1).max(1));

        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ power.to_bits().rotate_left(21) ^ v.to_bits().rotate_left(42) ^ noise_var.to_bits(),
        );
        let random = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..1.0)];
        starts.push((coarse(&random), random));

        let rough = NelderMeadOptions {
            max_evals: 120,
            f_tol: 1e-8,
            x_tol: 1e-4,
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (_, x0) in &starts {
            let m = nelder_mead_max(coarse, x0, &[0.1, 0.15], &lo, &hi, rough);
            if best.as_ref().map_or(true, |(bv, _)| m.value > *bv) {
                best = Some((m.value, m.x));
            }
        }
        let (_, x_rough) = best.expect("at least one start");

        let polish = NelderMeadOptions {
            max_evals: 100,
            f_tol: 1e-10,
            x_tol: 1e-5,
        };
        let m = nelder_mead_max(fine, &x_rough, &[0.02, 0.03], &lo, &hi, polish);
        let input = BinaryInput::with_power(power, m.x[0], m.x[1])?;
        Ok(IsubPoint { input, rate: m.value })
    }
}

fn eval(power: f64, p1: f64, ratio: f64, v: f64, noise_var: f64, quad: &MiQuadrature) -> f64 {
    match BinaryInput::with_power(power, p1, ratio) {
        Ok(x) => expected_mi_nats(&x, v, noise_var, quad),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// `I_sub(P, v)` in nats with the default optimizer.
pub fn optimize_isub(power: f64, v: f64, noise_var: f64) -> Result<IsubPoint> {
    IsubOptimizer::default().optimize(power, v, noise_var)
}
