//! Brute-force checks of the pilot power allocation results for causal
//! Gauss-Markov estimation.
//!
//! With `x_i = sigma^2 / P_i` the estimation gain is
//! `phi = V^T (A + U)^{-1} V`, `U = diag(x)`, `V = (alpha^{k-1}, .., alpha, 1)`.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num::{BigRational, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::causal_gain_gm;
use crate::fading::FadingModel;

pub const MAX_ENUMERATION: u128 = 10_000_000;
pub const MAX_LEMMA_K: usize = 8;
const CORNER_TOL: f64 = 1e-10;

/// `phi = V^T D (D A D + sigma^2 I)^{-1} D V` for consecutive pilots with `powers`.
pub fn phi(alpha: f64, powers: &[f64], noise_var: f64) -> Result<f64> {
    causal_gain_gm(alpha, powers, noise_var)
}

fn gm_matrix(alpha: f64, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| alpha.powi((i as i32 - j as i32).abs()))
}

fn v_vector(alpha: f64, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |i, _| alpha.powi((k - 1 - i) as i32))
}

/// `V^T (A + diag(x))^{-1} V` through an explicit inverse.
pub fn quadratic_form(alpha: f64, x: &[f64]) -> Result<f64> {
    let k = x.len();
    if k == 0 {
        return Ok(0.0);
    }
    let mut m = gm_matrix(alpha, k);
    for (i, &xi) in x.iter().enumerate() {
        m[(i, i)] += xi;
    }
    let inv = m.try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let v = v_vector(alpha, k);
    Ok(v.dot(&(inv * &v)))
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// `V^T (A + diag(x))^{-1} V` in exact rational arithmetic on the binary values of
/// `alpha` and `x`.
pub fn exact_quadratic_form(alpha: f64, x: &[f64]) -> BigRational {
    let k = x.len();
    let a = rational(alpha);
    let mut pow = vec![BigRational::one()];
    for i in 1..k {
        let next = &pow[i - 1] * &a;
        pow.push(next);
    }
    // Augmented system [A + U | V].
    let mut m: Vec<Vec<BigRational>> = (0..k)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..k).map(|j| pow[i.abs_diff(j)].clone()).collect();
            row[i] += rational(x[i]);
            row.push(pow[k - 1 - i].clone());
            row
        })
        .collect();
    // A + U is positive definite, so no pivoting is needed.
    for c in 0..k {
        for r in c + 1..k {
            let f = &m[r][c] / &m[c][c];
            if f.is_zero() {
                continue;
            }
            for j in c..=k {
                let t = &f * &m[c][j];
                m[r][j] -= t;
            }
        }
    }
    let mut y = vec![BigRational::zero(); k];
    for r in (0..k).rev() {
        let mut acc = m[r][k].clone();
        for j in r + 1..k {
            acc -= &m[r][j] * &y[j];
        }
        y[r] = acc / &m[r][r];
    }
    (0..k).fold(BigRational::zero(), |acc, i| acc + &pow[k - 1 - i] * &y[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub k: usize,
    pub budget: f64,
    pub grid_step: f64,
    pub points: u64,
    pub best_allocation: Vec<f64>,
    pub best_phi: f64,
    pub corner_phi: f64,
    pub is_corner_optimal: bool,
}

fn binomial(n: u128, r: u128) -> u128 {
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Calls `f` with every composition of `n` into `k` non-negative parts, in lexicographic order.
fn for_each_composition(n: usize, k: usize, prefix: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if prefix.len() + 1 == k {
        let used: usize = prefix.iter().sum();
        prefix.push(n - used);
        f(prefix);
        prefix.pop();
        return;
    }
    let used: usize = prefix.iter().sum();
    for c in 0..=n - used {
        prefix.push(c);
        for_each_composition(n, k, prefix, f);
        prefix.pop();
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    FadingModel::gauss_markov(alpha).map(|_| ())
}

/// Enumerates the simplex `sum P_j = budget` on a lattice of spacing `grid_step`
/// and compares the best `phi` with that of the corner `(0, .., 0, budget)`.
pub fn verify_theorem1(alpha: f64, k: usize, budget: f64, noise_var: f64, grid_step: f64) -> Result<AllocationReport> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::InvalidVerification("k must be at least 1".into()));
    }
    if !(budget > 0.0 && grid_step > 0.0) {
        return Err(Error::InvalidVerification("budget and step must be positive".into()));
    }
    let n = (budget / grid_step).round();
    if n < 1.0 || (n * grid_step - budget).abs() > 1e-9 * budget {
        return Err(Error::InvalidVerification(format!(
            "step {grid_step} does not divide budget {budget}"
        )));
    }
    let n = n as usize;
    let count = binomial((n + k - 1) as u128, (k - 1) as u128);
    if count > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge(count));
    }

    let mut corner = vec![0.0; k];
    corner[k - 1] = budget;
    let corner_phi = phi(alpha, &corner, noise_var)?;
    if k == 1 {
        return Ok(AllocationReport {
            k,
            budget,
            grid_step,
            points: 1,
            best_allocation: corner,
            best_phi: corner_phi,
            corner_phi,
            is_corner_optimal: true,
        });
    }

    // Split on the first coordinate; each chunk keeps its first maximum.
    let chunks: Vec<Result<(u64, Vec<f64>, f64)>> = (0..=n)
        .into_par_iter()
        .map(|first| {
            let mut best = (Vec::new(), f64::NEG_INFINITY);
            let mut points = 0u64;
            let mut err = None;
            let mut visit = |parts: &[usize]| {
                let alloc: Vec<f64> = parts.iter().map(|&c| c as f64 * grid_step).collect();
                points += 1;
                match phi(alpha, &alloc, noise_var) {
                    Ok(p) if p > best.1 => best = (alloc, p),
                    Ok(_) => {}
                    Err(e) => {
                        err.get_or_insert(e);
                    }
                }
            };
            let mut prefix = vec![first];
            for_each_composition(n, k, &mut prefix, &mut visit);
            match err {
                Some(e) => Err(e),
                None => Ok((points, best.0, best.1)),
            }
        })
        .collect();

    let mut points = 0;
    let mut best_allocation = Vec::new();
    let mut best_phi = f64::NEG_INFINITY;
    for c in chunks {
        let (p, alloc, v) = c?;
        points += p;
        if v > best_phi {
            best_phi = v;
            best_allocation = alloc;
        }
    }
    Ok(AllocationReport {
        k,
        budget,
        grid_step,
        points,
        best_allocation,
        best_phi,
        corner_phi,
        is_corner_optimal: corner_phi >= best_phi - CORNER_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub trials: usize,
    pub violations: usize,
    /// Most negative change of `phi` observed (0 when none decreased).
    pub worst_change: f64,
}

/// Random allocations; moves a random share of a random earlier pilot onto the last one.
pub fn check_transfers_to_last(
    alpha: f64,
    k: usize,
    budget: f64,
    noise_var: f64,
    trials: usize,
    seed: u64,
) -> Result<TransferReport> {
    check_alpha(alpha)?;
    if k < 2 {
        return Err(Error::InvalidVerification("transfers need k >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst_change: f64 = 0.0;
    for _ in 0..trials {
        let w: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = w.iter().sum();
        let mut p: Vec<f64> = w.iter().map(|x| budget * x / total).collect();
        let before = phi(alpha, &p, noise_var)?;
        let j = rng.gen_range(0..k - 1);
        let delta = p[j] * rng.gen::<f64>();
        p[j] -= delta;
        p[k - 1] += delta;
        let after = phi(alpha, &p, noise_var)?;
        let change = after - before;
        if change < -1e-14 * before.abs().max(1.0) {
            violations += 1;
        }
        worst_change = worst_change.min(change);
    }
    Ok(TransferReport {
        trials,
        violations,
        worst_change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub alpha: f64,
    pub x_values: Vec<f64>,
    pub permutations: usize,
    /// Diagonal in non-increasing order and its value.
    pub sorted_diagonal: Vec<f64>,
    pub sorted_value: f64,
    pub max_value: f64,
    /// Diagonal attaining `max_value` (first in enumeration order).
    pub max_diagonal: Vec<f64>,
    pub sorted_is_max: bool,
    /// No other arrangement attains the sorted value exactly.
    pub ties_only_equal: bool,
    /// Near-ties settled in exact arithmetic.
    pub exact_comparisons: usize,
}

/// Evaluates `V^T (A + U)^{-1} V` for every arrangement of `x_values` on the diagonal of `U`.
pub fn verify_lemma1(alpha: f64, x_values: &[f64]) -> Result<LemmaReport> {
    check_alpha(alpha)?;
    let k = x_values.len();
    if k == 0 || k > MAX_LEMMA_K {
        return Err(Error::InvalidVerification(format!(
            "lemma enumeration needs 1 <= k <= {MAX_LEMMA_K}, got {k}"
        )));
    }
    if let Some(x) = x_values.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidVerification(format!("x values must be non-negative, got {x}")));
    }
    let mut sorted = x_values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let sorted_value = quadratic_form(alpha, &sorted)?;

    let mut evaluated = Vec::new();
    for perm in (0..k).permutations(k) {
        let d: Vec<f64> = perm.iter().map(|&i| x_values[i]).collect();
        let q = quadratic_form(alpha, &d)?;
        evaluated.push((d, q));
    }
    let (max_diagonal, max_value) = evaluated
        .iter()
        .fold((Vec::new(), f64::NEG_INFINITY), |acc, (d, q)| {
            if *q > acc.1 {
                (d.clone(), *q)
            } else {
                acc
            }
        });
    // Arrangements within rounding of the maximum are compared exactly.
    let tol = 1e-12 * max_value.abs().max(1e-300);
    let exact_sorted = exact_quadratic_form(alpha, &sorted);
    let mut sorted_is_max = sorted_value >= max_value - tol;
    let mut ties_only_equal = true;
    let mut exact_comparisons = 0;
    for (d, _) in evaluated.iter().filter(|(d, q)| *q >= max_value - tol && *d != sorted) {
        exact_comparisons += 1;
        match exact_quadratic_form(alpha, d).cmp(&exact_sorted) {
            std::cmp::Ordering::Less => {}
            std::cmp::Ordering::Equal => ties_only_equal = false,
            std::cmp::Ordering::Greater => sorted_is_max = false,
        }
    }
    Ok(LemmaReport {
        alpha,
        x_values: x_values.to_vec(),
        permutations: evaluated.len(),
        sorted_diagonal: sorted,
        sorted_value,
        max_value,
        max_diagonal,
        sorted_is_max,
        ties_only_equal,
        exact_comparisons,
    })
}

/// Closed form of `xi(x_a, x_b)`: the gain of a cluster whose last two diagonal
/// entries are `x_a, x_b`, minus `alpha^4` times the gain `phi_km2` of the leading part.
pub fn xi_closed_form(x_a: f64, x_b: f64, alpha: f64, phi_km2: f64) -> f64 {
    let a2 = alpha * alpha;
    let a4 = a2 * a2;
    let c2 = 1.0 - a2 * phi_km2;
    let c4 = 1.0 - a4 * phi_km2;
    let lead = alpha - alpha * a2 * phi_km2;
    let num = lead * lead * x_b + c4 * c4 * x_a + c2 * c4 * (1.0 - a2);
    let den = x_a * x_b + c4 * x_a + c2 * x_b + c2 * (1.0 - a2);
    num / den
}

/// `xi` from the full `(A_k + U_k)^{-1}` with `U_k = diag(base, x_a, x_b)`.
pub fn xi_direct(x_a: f64, x_b: f64, alpha: f64, base: &[f64]) -> Result<f64> {
    let mut full = base.to_vec();
    full.push(x_a);
    full.push(x_b);
    let total = quadratic_form(alpha, &full)?;
    Ok(total - alpha.powi(4) * quadratic_form(alpha, base)?)
}

/// Central differences `(d xi / d x_a, d xi / d x_b)`.
pub fn xi_partials<F>(xi: F, x_a: f64, x_b: f64, h: f64) -> (f64, f64)
where
    F: Fn(f64, f64) -> f64,
{
    let da = (xi(x_a + h, x_b) - xi(x_a - h, x_b)) / (2.0 * h);
    let db = (xi(x_a, x_b + h) - xi(x_a, x_b - h)) / (2.0 * h);
    (da, db)
}
