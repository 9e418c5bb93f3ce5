//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use psam_core::mi::{expected_mi_with, BinaryInput, MiQuadrature};
use psam_core::quadrature::gauss_hermite;

/// Complex mass points and their probabilities.
pub struct ComplexInput {
    pub points: [(f64, f64); 2],
    pub probs: [f64; 2],
}

impl ComplexInput {
    pub fn rotated(input: &BinaryInput, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            points: [(input.m1() * c, input.m1() * s), (input.m2() * c, input.m2() * s)],
            probs: [input.p1(), input.p2()],
        }
    }
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Conditional MI (nats) for complex mass points and a complex estimate, by a
/// uniform Riemann sum of `-f ln f` over the output plane.
pub fn conditional_mi_plane(x: &ComplexInput, est: (f64, f64), v: f64, noise: f64, h: f64) -> f64 {
    let means = [cmul(est, x.points[0]), cmul(est, x.points[1])];
    let vars = [
        v * (x.points[0].0.powi(2) + x.points[0].1.powi(2)) + noise,
        v * (x.points[1].0.powi(2) + x.points[1].1.powi(2)) + noise,
    ];
    let reach = 6.5 * vars[0].max(vars[1]).sqrt();
    let lo_re = means[0].0.min(means[1].0) - reach;
    let hi_re = means[0].0.max(means[1].0) + reach;
    let lo_im = means[0].1.min(means[1].1) - reach;
    let hi_im = means[0].1.max(means[1].1) + reach;
    let nr = ((hi_re - lo_re) / h).ceil() as usize;
    let ni = ((hi_im - lo_im) / h).ceil() as usize;
    let coef = [
        x.probs[0] / (std::f64::consts::PI * vars[0]),
        x.probs[1] / (std::f64::consts::PI * vars[1]),
    ];
    let mut acc = 0.0;
    for a in 0..=nr {
        let yr = lo_re + a as f64 * h;
        for b in 0..=ni {
            let yi = lo_im + b as f64 * h;
            let mut f = 0.0;
            for i in 0..2 {
                let d2 = (yr - means[i].0).powi(2) + (yi - means[i].1).powi(2);
                f += coef[i] * (-d2 / vars[i]).exp();
            }
            if f > 0.0 {
                acc -= f * f.ln();
            }
        }
    }
    let h_y = acc * h * h;
    let h_y_given_x: f64 = (0..2)
        .map(|i| x.probs[i] * (std::f64::consts::PI * std::f64::consts::E * vars[i]).ln())
        .sum();
    h_y - h_y_given_x
}

/// Expected MI (nats) over a complex estimate `~ CN(0, 1 - v)`: tensor
/// Gauss-Hermite over both estimate components, plane sum inside.
pub fn expected_mi_full(input: &BinaryInput, v: f64, noise: f64, est_nodes: usize, h: f64) -> f64 {
    let x = ComplexInput::rotated(input, 0.0);
    let rule = gauss_hermite(est_nodes);
    let scale = (1.0 - v).sqrt();
    let mut acc = 0.0;
    for (a, wa) in rule.iter() {
        for (b, wb) in rule.iter() {
            acc += wa * wb * conditional_mi_plane(&x, (scale * a, scale * b), v, noise, h);
        }
    }
    acc / std::f64::consts::PI
}

/// Exhaustive search over `(p1, m1)` with `m2` fixed by the power budget,
/// followed by local refinement around the best cell. Returns the rate in nats.
pub fn isub_grid_search(power: f64, v: f64, noise: f64, n: usize, quad: &MiQuadrature) -> (f64, f64, f64) {
    let rate = |p1: f64, m1: f64| -> f64 {
        let m2_sq = (power - p1 * m1 * m1) / (1.0 - p1);
        if !(m1 < 0.0 && m2_sq > 0.0) {
            return f64::NEG_INFINITY;
        }
        match BinaryInput::new(m1, m2_sq.sqrt(), p1) {
            Ok(x) => expected_mi_with(&x, v, noise, quad).unwrap(),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    // m1 is parameterized as a fraction of its largest feasible magnitude.
    let point = |p1: f64, frac: f64| (p1, -frac * (power / p1).sqrt());
    let mut best = (f64::NEG_INFINITY, 0.5, 0.5);
    for i in 0..n {
        let p1 = (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let frac = (j as f64 + 0.5) / n as f64;
            let (p, m) = point(p1, frac);
            let r = rate(p, m);
            if r > best.0 {
                best = (r, p1, frac);
            }
        }
    }
    let mut step = 1.0 / n as f64;
    for _ in 0..4 {
        let (_, c_p, c_f) = best;
        for i in -10..=10 {
            let p1 = (c_p + i as f64 * step / 10.0).clamp(1e-6, 1.0 - 1e-6);
            for j in -10..=10 {
                let frac = (c_f + j as f64 * step / 10.0).clamp(1e-6, 1.0 - 1e-9);
                let (p, m) = point(p1, frac);
                let r = rate(p, m);
                if r > best.0 {
                    best = (r, p1, frac);
                }
            }
        }
        step /= 10.0;
    }
    let (r, p1, frac) = best;
    (r, p1, point(p1, frac).1)
}
