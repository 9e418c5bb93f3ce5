//! Gaussian quadrature rules built with the Golub-Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of an `n`-point Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    fn from_jacobi(diag: &[f64], offdiag: &[f64], mu0: f64) -> Self {
        let n = diag.len();
        let mut j = DMatrix::zeros(n, n);
        for i in 0..n {
            j[(i, i)] = diag[i];
        }
        for (i, &b) in offdiag.iter().enumerate() {
            j[(i, i + 1)] = b;
            j[(i + 1, i)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss-Hermite rule for `int f(x) exp(-x^2) dx` over the real line.
pub fn gauss_hermite(n: usize) -> GaussRule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|i| (i as f64 / 2.0).sqrt()).collect();
    let mut rule = GaussRule::from_jacobi(&diag, &off, std::f64::consts::PI.sqrt());
    // Enforce exact symmetry of the rule.
    for i in 0..n / 2 {
        let x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
        let w = 0.5 * (rule.weights[n - 1 - i] + rule.weights[i]);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.0;
    }
    rule
}

/// `(L_n(x), L_n'(x), L_{n+1}(x))` by the three-term recurrence.
fn laguerre_eval(n: usize, x: f64) -> (f64, f64, f64) {
    // (L_{k-1}, L_k) starting at k = 0
    let (mut lower, mut cur) = (0.0, 1.0);
    let mut next = 1.0 - x;
    for k in 1..=n {
        lower = cur;
        cur = next;
        next = (((2 * k + 1) as f64 - x) * cur - k as f64 * lower) / (k + 1) as f64;
    }
    (cur, n as f64 * (cur - lower) / x, next)
}

/// Gauss-Laguerre rule for `int_0^inf f(x) exp(-x) dx`.
///
/// Golub-Welsch nodes are polished by Newton steps; weights use
/// `x / ((n + 1)^2 L_{n+1}(x)^2)` so the tail weights stay accurate.
pub fn gauss_laguerre(n: usize) -> GaussRule {
    assert!(n >= 1);
    let diag: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64).collect();
    let off: Vec<f64> = (1..n).map(|i| i as f64).collect();
    let mut rule = GaussRule::from_jacobi(&diag, &off, 1.0);
    for (x, w) in rule.nodes.iter_mut().zip(rule.weights.iter_mut()) {
        for _ in 0..3 {
            let (l, dl, _) = laguerre_eval(n, *x);
            if dl == 0.0 {
                break;
            }
            *x -= l / dl;
        }
        let (_, _, next) = laguerre_eval(n, *x);
        let scaled = (n + 1) as f64 * next;
        *w = *x / (scaled * scaled);
    }
    rule
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_moments() {
        let r = gauss_hermite(20);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let m0: f64 = r.weights.iter().sum();
        assert_relative_eq!(m0, sqrt_pi, max_relative = 1e-13);
        let m2: f64 = r.iter().map(|(x, w)| w * x * x).sum();
        assert_relative_eq!(m2, sqrt_pi / 2.0, max_relative = 1e-12);
        let m8: f64 = r.iter().map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(m8, sqrt_pi * 105.0 / 16.0, max_relative = 1e-11);
        let m3: f64 = r.iter().map(|(x, w)| w * x.powi(3)).sum();
        assert!(m3.abs() < 1e-13);
    }

    #[test]
    fn laguerre_moments() {
        let r = gauss_laguerre(16);
        let mut fact = 1.0;
        for k in 0..20 {
            if k > 0 {
                fact *= k as f64;
            }
            let m: f64 = r.iter().map(|(x, w)| w * x.powi(k)).sum();
            assert_relative_eq!(m, fact, max_relative = 1e-10);
        }
    }

    #[test]
    fn laguerre_tail_weights_keep_relative_accuracy() {
        // int_0^inf exp(-x / 2) dx = 2 needs w_i exp(x_i / 2) accurate at the largest nodes.
        for n in [16, 32, 64] {
            let r = gauss_laguerre(n);
            let s: f64 = r.iter().map(|(x, w)| w * (x / 2.0).exp()).sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-6);
        }
    }
}
