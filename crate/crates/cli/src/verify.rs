//! Numerical verification suite for the power allocation results.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use psam_core::theory::{
    check_transfers_to_last, quadratic_form, verify_lemma1, verify_theorem1, xi_closed_form, xi_direct, xi_partials,
};

/// `xi(x_a, x_b, alpha, phi_km2)`; replaceable to exercise the failure path.
pub type XiFn = dyn Fn(f64, f64, f64, f64) -> f64 + Sync;

pub fn default_xi() -> &'static XiFn {
    &xi_closed_form
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const THEOREM_ALPHAS: [f64; 2] = [0.9, 0.99];
pub const THEOREM_NOISE: [f64; 3] = [0.5, 1.0, 2.0];
pub const TRANSFER_TRIALS: usize = 500;
pub const LEMMA_INSTANCES: usize = 100;
pub const XI_INSTANCES: usize = 100;

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

pub fn theorem_checks(ks: &[usize], seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &k in ks {
        for &alpha in &THEOREM_ALPHAS {
            for &s2 in &THEOREM_NOISE {
                let budget = k as f64;
                let r = verify_theorem1(alpha, k, budget, s2, budget / 20.0)?;
                out.push(check(
                    format!("theorem1 k={k} alpha={alpha} noise={s2}"),
                    r.is_corner_optimal,
                    format!(
                        "{} points, corner phi {:.12}, best phi {:.12} at {:?}",
                        r.points, r.corner_phi, r.best_phi, r.best_allocation
                    ),
                ));
                if k >= 2 {
                    let t = check_transfers_to_last(alpha, k, budget, s2, TRANSFER_TRIALS, seed)?;
                    out.push(check(
                        format!("transfers k={k} alpha={alpha} noise={s2}"),
                        t.violations == 0,
                        format!("{} trials, {} decreases, worst change {:e}", t.trials, t.violations, t.worst_change),
                    ));
                }
            }
        }
    }
    Ok(out)
}

pub fn lemma_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let worked = verify_lemma1(0.5, &[1.0, 2.0])?;
    let swapped = quadratic_form(0.5, &[1.0, 2.0])?;
    let ok = (worked.sorted_value - 3.0 / 5.75).abs() < 1e-12 && (swapped - 2.25 / 5.75).abs() < 1e-12;
    out.push(check(
        "lemma1 worked case alpha=0.5 x={1,2}",
        ok && worked.sorted_is_max && worked.ties_only_equal,
        format!("diag(2,1) -> {:.5}, diag(1,2) -> {:.5}", worked.sorted_value, swapped),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut perms = 0;
    for i in 0..LEMMA_INSTANCES {
        let k = rng.gen_range(2..=6);
        let alpha = rng.gen_range(0.01..0.99);
        let x: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..10.0)).collect();
        let r = verify_lemma1(alpha, &x)?;
        perms += r.permutations;
        if !(r.sorted_is_max && r.ties_only_equal) {
            failures.push(i);
        }
    }
    out.push(check(
        format!("lemma1 {LEMMA_INSTANCES} random instances"),
        failures.is_empty(),
        format!("{perms} permutations evaluated, failing instances {failures:?}"),
    ));
    Ok(out)
}

pub fn xi_checks(xi: &XiFn, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap: f64 = 0.0;
    let mut swap_fail = 0;
    let mut sign_fail = 0;
    for _ in 0..XI_INSTANCES {
        let m = rng.gen_range(0..=4);
        let alpha = rng.gen_range(0.05..0.99);
        let base: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
        let phi_km2 = quadratic_form(alpha, &base)?;
        let xa = rng.gen_range(0.01..10.0);
        let xb = rng.gen_range(0.01..10.0);
        let f = |a: f64, b: f64| xi(a, b, alpha, phi_km2);
        worst_gap = worst_gap.max((f(xa, xb) - xi_direct(xa, xb, alpha, &base)?).abs());
        let (lo, hi) = if xa < xb { (xa, xb) } else { (xb, xa) };
        if lo < hi && !(f(lo, hi) < f(hi, lo)) {
            swap_fail += 1;
        }
        let (da, db) = xi_partials(f, xa, xb, 1e-6);
        if da > 1e-9 || db > 1e-9 {
            sign_fail += 1;
        }
    }
    Ok(vec![
        check(
            format!("xi closed form vs direct, {XI_INSTANCES} instances"),
            worst_gap <= 1e-10,
            format!("max |difference| {worst_gap:e}"),
        ),
        check(
            "xi swap inequality",
            swap_fail == 0,
            format!("{swap_fail} of {XI_INSTANCES} instances violate xi(lo, hi) < xi(hi, lo)"),
        ),
        check(
            "xi partial derivatives non-positive",
            sign_fail == 0,
            format!("{sign_fail} of {XI_INSTANCES} instances with a positive central difference"),
        ),
    ])
}

/// Theorem, transfer, lemma and xi checks with the given `xi` evaluator.
pub fn run_suite(xi: &XiFn, seed: u64) -> Result<VerifyReport> {
    let mut checks = theorem_checks(&[1, 2, 3, 4], seed)?;
    checks.extend(lemma_checks(seed)?);
    checks.extend(xi_checks(xi, seed)?);
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
