//! Tabulated `I_sub(P, v)` surface, bilinear interpolation and text persistence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::{IsubOptimizer, QuadratureSpec, RateUnit};
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "psam-isub-grid/1";

/// Relative slack on the power axis for queries that overshoot `p_max` by rounding.
const P_SLACK: f64 = 1e-9;
const V_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p_max: f64,
    /// Number of positive powers; `P = 0` is always added as the first node.
    pub p_points: usize,
    pub v_points: usize,
    pub noise_var: f64,
    pub rate_unit: RateUnit,
    pub quadrature: QuadratureSpec,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(p_max: f64, p_points: usize, v_points: usize, noise_var: f64) -> Self {
        Self {
            p_max,
            p_points,
            v_points,
            noise_var,
            rate_unit: RateUnit::default(),
            quadrature: QuadratureSpec::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("p_max must be positive, got {}", self.p_max)));
        }
        if self.p_points < 2 || self.v_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points per axis, got {} x {}",
                self.p_points, self.v_points
            )));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::NonPositiveNoise(self.noise_var));
        }
        Ok(())
    }

    /// `0` followed by `p_points` geometric nodes from `p_max / 1000` to `p_max`.
    pub fn p_axis(&self) -> Vec<f64> {
        let n = self.p_points;
        let lo = self.p_max / 1000.0;
        let ratio = (self.p_max / lo).ln();
        let mut axis = Vec::with_capacity(n + 1);
        axis.push(0.0);
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            axis.push(if i + 1 == n { self.p_max } else { lo * (ratio * t).exp() });
        }
        axis
    }

    pub fn v_axis(&self) -> Vec<f64> {
        let n = self.v_points;
        (0..n)
            .map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsubGrid {
    p_axis: Vec<f64>,
    v_axis: Vec<f64>,
    /// Row-major, one row per power node.
    values: Vec<f64>,
    noise_var: f64,
    rate_unit: RateUnit,
    config_hash: Option<String>,
}

/// Default grid: rates in bits, default quadrature, seed 0.
pub fn build_grid(p_max: f64, p_points: usize, v_points: usize, noise_var: f64) -> Result<IsubGrid> {
    build_grid_with(&GridSpec::new(p_max, p_points, v_points, noise_var))
}

pub fn build_grid_with(spec: &GridSpec) -> Result<IsubGrid> {
    spec.validate()?;
    let p_axis = spec.p_axis();
    let v_axis = spec.v_axis();
    let opt = IsubOptimizer::new(spec.quadrature, spec.seed);
    let scale = spec.rate_unit.from_nats();
    let nv = v_axis.len();
    let values = (0..p_axis.len() * nv)
        .into_par_iter()
        .map(|idx| {
            opt.optimize(p_axis[idx / nv], v_axis[idx % nv], spec.noise_var)
                .map(|pt| pt.rate * scale)
        })
        .collect::<Result<Vec<f64>>>()?;
    IsubGrid::new(p_axis, v_axis, values, spec.noise_var, spec.rate_unit)
}

fn strictly_increasing(a: &[f64]) -> bool {
    a.windows(2).all(|w| w[0] < w[1])
}

/// Index `i` of the cell `[axis[i], axis[i + 1]]` containing `x`, and the local coordinate.
fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let last = axis.len() - 2;
    let i = axis.partition_point(|&a| a <= x).saturating_sub(1).min(last);
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    (i, t)
}

impl IsubGrid {
    pub fn new(
        p_axis: Vec<f64>,
        v_axis: Vec<f64>,
        values: Vec<f64>,
        noise_var: f64,
        rate_unit: RateUnit,
    ) -> Result<Self> {
        if p_axis.len() < 2 || v_axis.len() < 2 {
            return Err(Error::InvalidGrid("each axis needs at least two nodes".into()));
        }
        if !strictly_increasing(&p_axis) || !strictly_increasing(&v_axis) {
            return Err(Error::InvalidGrid("axes must be strictly increasing".into()));
        }
        if p_axis[0] < 0.0 || v_axis[0] < 0.0 || v_axis[v_axis.len() - 1] > 1.0 {
            return Err(Error::InvalidGrid("axes outside P >= 0, v in [0, 1]".into()));
        }
        if values.len() != p_axis.len() * v_axis.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {} x {} grid",
                values.len(),
                p_axis.len(),
                v_axis.len()
            )));
        }
        if let Some(x) = values.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidGrid(format!("invalid rate value {x}")));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::NonPositiveNoise(noise_var));
        }
        Ok(Self {
            p_axis,
            v_axis,
            values,
            noise_var,
            rate_unit,
            config_hash: None,
        })
    }

    pub fn p_axis(&self) -> &[f64] {
        &self.p_axis
    }

    pub fn v_axis(&self) -> &[f64] {
        &self.v_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ip: usize, iv: usize) -> f64 {
        self.values[ip * self.v_axis.len() + iv]
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn rate_unit(&self) -> RateUnit {
        self.rate_unit
    }

    pub fn p_max(&self) -> f64 {
        self.p_axis[self.p_axis.len() - 1]
    }

    pub fn config_hash(&self) -> Option<&str> {
        self.config_hash.as_deref()
    }

    pub fn set_config_hash(&mut self, hash: Option<String>) {
        self.config_hash = hash;
    }

    /// Errors unless the grid was built for `noise_var` (up to float formatting).
    pub fn check_noise(&self, noise_var: f64) -> Result<()> {
        if (self.noise_var - noise_var).abs() <= 1e-12 * noise_var.abs().max(1.0) {
            Ok(())
        } else {
            Err(Error::NoiseMismatch {
                grid: self.noise_var,
                requested: noise_var,
            })
        }
    }

    /// Bilinear interpolation; exact at nodes, no extrapolation.
    pub fn interpolate(&self, p: f64, v: f64) -> Result<f64> {
        let (p0, p1) = (self.p_axis[0], self.p_max());
        let (v0, v1) = (self.v_axis[0], self.v_axis[self.v_axis.len() - 1]);
        let p_tol = P_SLACK * p1;
        if !(p >= p0 - p_tol && p <= p1 + p_tol && v >= v0 - V_SLACK && v <= v1 + V_SLACK) {
            return Err(Error::OutOfGrid { p, v });
        }
        let (i, t) = locate(&self.p_axis, p.clamp(p0, p1));
        let (j, u) = locate(&self.v_axis, v.clamp(v0, v1));
        let a = self.value(i, j);
        let b = self.value(i + 1, j);
        let c = self.value(i, j + 1);
        let d = self.value(i + 1, j + 1);
        Ok((1.0 - t) * (1.0 - u) * a + t * (1.0 - u) * b + (1.0 - t) * u * c + t * u * d)
    }

    /// Human-diffable text form; floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |xs: &[f64]| xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        writeln!(s, "format = {FORMAT_TAG}").unwrap();
        writeln!(s, "config_hash = {}", self.config_hash.as_deref().unwrap_or("-")).unwrap();
        writeln!(s, "rate_unit = {}", self.rate_unit).unwrap();
        writeln!(s, "noise_var = {:e}", self.noise_var).unwrap();
        writeln!(s, "p_points = {}", self.p_axis.len()).unwrap();
        writeln!(s, "v_points = {}", self.v_axis.len()).unwrap();
        writeln!(s, "p_axis = {}", join(&self.p_axis)).unwrap();
        writeln!(s, "v_axis = {}", join(&self.v_axis)).unwrap();
        writeln!(s, "values").unwrap();
        for row in self.values.chunks(self.v_axis.len()) {
            writeln!(s, "{}", join(row)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines.next().ok_or(Error::GridParse {
                line: 0,
                msg: format!("missing '{key}'"),
            })?;
            let (k, v) = line.split_once('=').ok_or_else(|| Error::GridParse {
                line: n,
                msg: format!("expected '{key} = ...'"),
            })?;
            if k.trim() != key {
                return Err(Error::GridParse {
                    line: n,
                    msg: format!("expected key '{key}', found '{}'", k.trim()),
                });
            }
            Ok((n, v.trim().to_string()))
        };
        let err = |line: usize, msg: String| Error::GridParse { line, msg };
        let floats = |line: usize, s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(line, format!("'{t}': {e}"))))
                .collect()
        };

        let (n, tag) = header("format")?;
        if tag != FORMAT_TAG {
            return Err(err(n, format!("unsupported format '{tag}'")));
        }
        let (_, hash) = header("config_hash")?;
        let (n, unit) = header("rate_unit")?;
        let rate_unit: RateUnit = unit.parse().map_err(|e| err(n, e))?;
        let (n, noise) = header("noise_var")?;
        let noise_var: f64 = noise.parse().map_err(|e| err(n, format!("{e}")))?;
        let (n, pp) = header("p_points")?;
        let p_points: usize = pp.parse().map_err(|e| err(n, format!("{e}")))?;
        let (n, vp) = header("v_points")?;
        let v_points: usize = vp.parse().map_err(|e| err(n, format!("{e}")))?;
        let (n, pa) = header("p_axis")?;
        let p_axis = floats(n, &pa)?;
        if p_axis.len() != p_points {
            return Err(err(n, format!("expected {p_points} powers, found {}", p_axis.len())));
        }
        let (n, va) = header("v_axis")?;
        let v_axis = floats(n, &va)?;
        if v_axis.len() != v_points {
            return Err(err(n, format!("expected {v_points} variances, found {}", v_axis.len())));
        }
        drop(header);

        let (n, marker) = lines.next().ok_or(err(0, "missing 'values'".into()))?;
        if marker.trim() != "values" {
            return Err(err(n, "expected 'values'".into()));
        }
        let mut values = Vec::with_capacity(p_points * v_points);
        let mut rows = 0;
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row = floats(n, line)?;
            if row.len() != v_points {
                return Err(err(n, format!("expected {v_points} values, found {}", row.len())));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != p_points {
            return Err(err(0, format!("expected {p_points} value rows, found {rows}")));
        }
        let mut grid = Self::new(p_axis, v_axis, values, noise_var, rate_unit)?;
        grid.config_hash = (hash != "-").then_some(hash);
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> IsubGrid {
        IsubGrid::new(
            vec![0.0, 1.0, 3.0],
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.0, 0.0, 0.4, 0.3, 0.1, 0.7, 0.5, 0.2],
            1.0,
            RateUnit::Nats,
        )
        .unwrap()
    }

    #[test]
    fn axes() {
        let s = GridSpec::new(10.0, 60, 60, 1.0);
        let p = s.p_axis();
        assert_eq!(p.len(), 61);
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 0.01).abs() < 1e-15);
        assert_eq!(p[60], 10.0);
        assert!(strictly_increasing(&p));
        let v = s.v_axis();
        assert_eq!((v[0], v[59], v.len()), (0.0, 1.0, 60));
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let g = toy();
        for (i, &p) in g.p_axis().iter().enumerate() {
            for (j, &v) in g.v_axis().iter().enumerate() {
                assert_eq!(g.interpolate(p, v).unwrap(), g.value(i, j));
            }
        }
    }

    #[test]
    fn cell_center_is_corner_mean() {
        let g = toy();
        let got = g.interpolate(2.0, 0.25).unwrap();
        assert!((got - (0.4 + 0.3 + 0.7 + 0.5) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_range() {
        let g = toy();
        assert_eq!(g.interpolate(3.1, 0.5), Err(Error::OutOfGrid { p: 3.1, v: 0.5 }));
        assert!(g.interpolate(-0.1, 0.5).is_err());
        assert!(g.interpolate(1.0, 1.01).is_err());
        assert!(g.interpolate(3.0 * (1.0 + 1e-12), 1.0).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let mut g = toy();
        g.set_config_hash(Some("abc123".into()));
        let back = IsubGrid::from_text(&g.to_text()).unwrap();
        assert_eq!(back, g);
        let g2 = toy();
        assert_eq!(IsubGrid::from_text(&g2.to_text()).unwrap(), g2);
    }

    #[test]
    fn text_rejects_corruption() {
        let text = toy().to_text();
        assert!(IsubGrid::from_text(&text.replace("v_points = 3", "v_points = 4")).is_err());
        assert!(IsubGrid::from_text(&text.replace("format = psam", "format = xyz")).is_err());
        let truncated: String = text.lines().take(11).map(|l| format!("{l}\n")).collect();
        assert!(IsubGrid::from_text(&truncated).is_err());
    }

    #[test]
    fn noise_check() {
        let g = toy();
        assert!(g.check_noise(1.0).is_ok());
        assert!(matches!(g.check_noise(0.5), Err(Error::NoiseMismatch { .. })));
    }

    #[test]
    fn invalid_construction() {
        assert!(IsubGrid::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0; 3], 1.0, RateUnit::Bits).is_err());
        assert!(IsubGrid::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0; 4], 1.0, RateUnit::Bits).is_err());
        assert!(GridSpec::new(0.0, 4, 4, 1.0).validate().is_err());
        assert!(GridSpec::new(1.0, 1, 4, 1.0).validate().is_err());
    }
}
