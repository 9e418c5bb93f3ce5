//! Small derivative-free maximizers: box-projected Nelder-Mead and golden-section search.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once the spread of simplex values drops below this.
    pub f_tol: f64,
    /// ... and every vertex lies within this distance of the best one (per coordinate).
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 200,
            f_tol: 1e-11,
            x_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((xi, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *xi = xi.clamp(l, h);
    }
}

/// Maximizes `f` over the box `[lo, hi]` starting from `start` with initial steps `step`.
///
/// Trial points outside the box are projected back onto it before evaluation.
pub fn nelder_mead_max<F>(
    mut f: F,
    start: &[f64],
    step: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: NelderMeadOptions,
) -> Maximum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| {
        project(x, lo, hi);
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    let v0 = eval(&mut x0, &mut evals);
    simplex.push((x0.clone(), v0));
    for i in 0..n {
        let mut xi = x0.clone();
        xi[i] += step[i];
        if xi[i] > hi[i] {
            xi[i] = x0[i] - step[i];
        }
        let vi = eval(&mut xi, &mut evals);
        simplex.push((xi, vi));
    }

    loop {
        // Best first.
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (best - worst).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if evals >= opts.max_evals || (spread <= opts.f_tol && size <= opts.x_tol) || size < 1e-14 {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let mut xr = along(1.0);
        let vr = eval(&mut xr, &mut evals);
        if vr > simplex[0].1 {
            let mut xe = along(2.0);
            let ve = eval(&mut xe, &mut evals);
            simplex[n] = if ve > vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr > simplex[n - 1].1 {
            simplex[n] = (xr, vr);
            continue;
        }
        let (mut xc, vc) = if vr > worst {
            let mut xc = along(0.5);
            let vc = eval(&mut xc, &mut evals);
            (xc, vc)
        } else {
            let mut xc = along(-0.5);
            let vc = eval(&mut xc, &mut evals);
            (xc, vc)
        };
        if vc > worst.max(vr) {
            project(&mut xc, lo, hi);
            simplex[n] = (xc, vc);
            continue;
        }
        // Shrink toward the best vertex.
        let bx = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, b) in x.iter_mut().zip(&bx) {
                *xi = b + 0.5 * (*xi - b);
            }
            *v = eval(x, &mut evals);
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (x, value) = simplex.swap_remove(0);
    Maximum { x, value, evals }
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`; returns `(x, f(x))`.
pub fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_peak() {
        let f = |x: &[f64]| -(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.7).powi(2);
        let m = nelder_mead_max(f, &[0.0, 0.0], &[0.1, 0.1], &[-1.0, -1.0], &[1.0, 1.0], Default::default());
        assert!((m.x[0] - 0.3).abs() < 1e-5, "{:?}", m.x);
        assert!((m.x[1] + 0.7).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn nelder_mead_respects_box() {
        let f = |x: &[f64]| x[0] + x[1];
        let m = nelder_mead_max(f, &[0.2, 0.2], &[0.1, 0.1], &[0.0, 0.0], &[1.0, 0.5], Default::default());
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 0.5).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn golden_section() {
        let (x, v) = golden_section_max(|x| -(x - 1.234).powi(2), 0.0, 3.0, 1e-9);
        assert!((x - 1.234).abs() < 1e-8);
        assert!(v <= 0.0);
        let (x, _) = golden_section_max(|x| -x, 0.0, 1.0, 1e-9);
        assert!(x < 1e-8);
    }
}
