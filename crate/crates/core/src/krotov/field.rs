use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::spectral::cgl_nodes;

/// Update-shape `S(t) ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ShapeFunction {
    Constant,
    /// `sin²(πt/T)`; pins both edges.
    #[default]
    SinSquared,
    /// Flat top with `sin²` ramps lasting `rise·T` at both ends.
    FlatTop { rise: f64 },
}

impl ShapeFunction {
    pub fn eval(&self, t: f64, t_final: f64) -> f64 {
        let x = (t / t_final).clamp(0.0, 1.0);
        match *self {
            ShapeFunction::Constant => 1.0,
            ShapeFunction::SinSquared => (PI * x).sin().powi(2),
            ShapeFunction::FlatTop { rise } => {
                let r = rise.clamp(1e-12, 0.5);
                let edge = x.min(1.0 - x);
                if edge >= r {
                    1.0
                } else {
                    (0.5 * PI * edge / r).sin().powi(2)
                }
            }
        }
    }

    /// Samples on the global grid `t_n = nT/N`, `n = 0..=N`.
    pub fn samples(&self, t_final: f64, n_steps: usize) -> Vec<f64> {
        (0..=n_steps)
            .map(|n| self.eval(t_final * n as f64 / n_steps as f64, t_final))
            .collect()
    }
}

/// Control `ε(t)` on the global grid of `N` intervals, in one of three forms:
///
/// - grid samples `ε(t_n)`, linearly interpolated;
/// - piecewise constant (`piecewise_constant`): `grid_values[n]` holds
///   interval `n`, and the last entry repeats interval `N−1`;
/// - per-interval polynomials through the CGL-node values `sub_values[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    pub t_final: f64,
    /// `N + 1` values, see above.
    pub grid_values: Vec<f64>,
    /// `ε(t_n + τ_j)` per interval.
    pub sub_values: Option<Vec<Vec<f64>>>,
    pub piecewise_constant: bool,
    pub iteration: usize,
}

impl ControlField {
    pub fn from_fn(f: impl Fn(f64) -> f64, t_final: f64, n_steps: usize) -> Result<Self> {
        check_grid(t_final, n_steps)?;
        let dt = t_final / n_steps as f64;
        Ok(Self {
            t_final,
            grid_values: (0..=n_steps).map(|n| f(n as f64 * dt)).collect(),
            sub_values: None,
            piecewise_constant: false,
            iteration: 0,
        })
    }

    /// Piecewise-constant field holding `f` at the interval midpoints.
    pub fn from_fn_pwc(f: impl Fn(f64) -> f64, t_final: f64, n_steps: usize) -> Result<Self> {
        check_grid(t_final, n_steps)?;
        let dt = t_final / n_steps as f64;
        let mut grid_values: Vec<f64> = (0..n_steps).map(|n| f((n as f64 + 0.5) * dt)).collect();
        grid_values.push(grid_values[n_steps - 1]);
        Ok(Self {
            t_final,
            grid_values,
            sub_values: None,
            piecewise_constant: true,
            iteration: 0,
        })
    }

    /// Samples `f` at the grid points and at the CGL nodes of order `m`.
    pub fn from_fn_sub(f: impl Fn(f64) -> f64, t_final: f64, n_steps: usize, m: usize) -> Result<Self> {
        check_grid(t_final, n_steps)?;
        let dt = t_final / n_steps as f64;
        let grid = cgl_nodes(m, dt)?;
        let sub: Vec<Vec<f64>> = (0..n_steps)
            .map(|n| {
                let t_n = n as f64 * dt;
                grid.nodes.iter().map(|&tau| f(t_n + tau)).collect()
            })
            .collect();
        let mut field = Self {
            t_final,
            grid_values: vec![0.0; n_steps + 1],
            sub_values: Some(sub),
            piecewise_constant: false,
            iteration: 0,
        };
        field.sync_grid();
        Ok(field)
    }

    pub fn n_steps(&self) -> usize {
        self.grid_values.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps() as f64
    }

    pub fn sub_order(&self) -> Option<usize> {
        self.sub_values.as_ref().map(|s| s[0].len())
    }

    /// Copies the sub-grid values at `τ = 0` (and the last node) onto the grid.
    pub(crate) fn sync_grid(&mut self) {
        if let Some(sub) = &self.sub_values {
            let n = sub.len();
            for (k, s) in sub.iter().enumerate() {
                self.grid_values[k] = s[0];
            }
            self.grid_values[n] = *sub[n - 1].last().expect("non-empty interval");
        }
    }

    /// Same field re-sampled onto the CGL nodes of order `m` (grid values are
    /// kept where they coincide).
    pub fn refined(&self, m: usize) -> Result<Self> {
        let dt = self.dt();
        let nodes = cgl_nodes(m, dt)?.nodes;
        let sub = (0..self.n_steps())
            .map(|n| nodes.iter().map(|&tau| self.value_in(n, tau)).collect())
            .collect();
        let mut f = Self {
            sub_values: Some(sub),
            piecewise_constant: false,
            ..self.clone()
        };
        f.sync_grid();
        Ok(f)
    }

    /// Piecewise-constant version holding the interval midpoint values.
    pub fn to_piecewise_constant(&self) -> Self {
        if self.piecewise_constant {
            return self.clone();
        }
        let n_steps = self.n_steps();
        let half = 0.5 * self.dt();
        let mut grid_values: Vec<f64> = (0..n_steps).map(|n| self.value_in(n, half)).collect();
        grid_values.push(grid_values[n_steps - 1]);
        Self {
            t_final: self.t_final,
            grid_values,
            sub_values: None,
            piecewise_constant: true,
            iteration: self.iteration,
        }
    }

    /// `ε(t)`; at a grid point the later interval wins.
    pub fn value_at(&self, t: f64) -> f64 {
        let dt = self.dt();
        let n = ((t / dt).floor().max(0.0) as usize).min(self.n_steps() - 1);
        self.value_in(n, t - n as f64 * dt)
    }

    /// Interpolant of interval `n` at offset `τ ∈ [0, δt]`.
    pub fn value_in(&self, n: usize, tau: f64) -> f64 {
        let dt = self.dt();
        if self.piecewise_constant {
            return self.grid_values[n];
        }
        match &self.sub_values {
            None => {
                let w = (tau / dt).clamp(0.0, 1.0);
                self.grid_values[n] * (1.0 - w) + self.grid_values[n + 1] * w
            }
            Some(sub) => {
                let nodes = cgl_nodes(sub[n].len(), dt).expect("valid grid").nodes;
                lobatto_interpolate(&nodes, &sub[n], tau)
            }
        }
    }

    /// `(t, ε)` pairs for export: every distinct sample time (interval
    /// midpoints for a piecewise-constant field).
    pub fn samples(&self) -> Vec<(f64, f64)> {
        let dt = self.dt();
        if self.piecewise_constant {
            let n = self.n_steps();
            return (0..n).map(|k| ((k as f64 + 0.5) * dt, self.grid_values[k])).collect();
        }
        match &self.sub_values {
            None => self.grid_values.iter().enumerate().map(|(n, &e)| (n as f64 * dt, e)).collect(),
            Some(sub) => {
                let m = sub[0].len();
                let nodes = cgl_nodes(m, dt).expect("valid grid").nodes;
                let mut out = Vec::with_capacity(sub.len() * (m - 1) + 1);
                for (n, s) in sub.iter().enumerate() {
                    for j in 0..m - 1 {
                        out.push((n as f64 * dt + nodes[j], s[j]));
                    }
                }
                out.push((self.t_final, self.grid_values[sub.len()]));
                out
            }
        }
    }
}

fn check_grid(t_final: f64, n_steps: usize) -> Result<()> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid("t_final", "must be positive and finite"));
    }
    if n_steps == 0 {
        return Err(invalid("n_steps", "must be at least 1"));
    }
    Ok(())
}

/// Barycentric interpolation through Chebyshev–Lobatto nodes.
pub(crate) fn lobatto_interpolate(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let m = nodes.len();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..m {
        let d = x - nodes[j];
        if d == 0.0 {
            return values[j];
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == m - 1 {
            w *= 0.5;
        }
        num += w * values[j] / d;
        den += w / d;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_stay_in_unit_interval_and_pin_edges() {
        for s in [ShapeFunction::SinSquared, ShapeFunction::FlatTop { rise: 0.1 }] {
            assert_eq!(s.eval(0.0, 2.0), 0.0);
            assert!(s.eval(2.0, 2.0) < 1e-30);
            for k in 0..=100 {
                let v = s.eval(0.02 * k as f64, 2.0);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert_eq!(ShapeFunction::FlatTop { rise: 0.1 }.eval(1.0, 2.0), 1.0);
    }

    #[test]
    fn sub_grid_starts_on_grid_values() {
        let f = ControlField::from_fn_sub(|t| (3.0 * t).sin() + t, 2.0, 10, 5).unwrap();
        let sub = f.sub_values.as_ref().unwrap();
        for n in 0..10 {
            assert_eq!(sub[n][0], f.grid_values[n]);
        }
        assert_eq!(f.grid_values[10], sub[9][4]);
    }

    #[test]
    fn refinement_keeps_jumps_between_intervals() {
        let mut f = ControlField::from_fn_sub(|t| t, 1.0, 2, 3).unwrap();
        f.sub_values.as_mut().unwrap()[1] = vec![2.0, 2.0, 2.0];
        let r = f.refined(5).unwrap();
        let sub = r.sub_values.unwrap();
        assert!((sub[0][4] - 0.5).abs() < 1e-15);
        assert_eq!(sub[1][0], 2.0);
    }

    #[test]
    fn interpolant_reproduces_polynomials() {
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t.powi(3) - t.powi(4);
        let f = ControlField::from_fn_sub(p, 1.0, 4, 5).unwrap();
        for k in 0..37 {
            let t = k as f64 / 36.0;
            assert!((f.value_at(t) - p(t)).abs() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn grid_samples_interpolate_linearly() {
        let f = ControlField::from_fn(|t| t * t, 1.0, 4).unwrap();
        assert!((f.value_at(0.3) - (0.0625 * 0.8 + 0.25 * 0.2)).abs() < 1e-15);
        assert_eq!(f.value_at(1.0), 1.0);
        assert_eq!(f.samples().len(), 5);
        let pc = f.to_piecewise_constant();
        assert_eq!(pc.samples().len(), 4);
        assert!((pc.value_at(0.3) - 0.5 * (0.0625 + 0.25)).abs() < 1e-15);
        assert_eq!(pc.grid_values[4], pc.grid_values[3]);
        // refining a linear interpolant is exact
        let r = f.refined(4).unwrap();
        for k in 0..=40 {
            let t = k as f64 / 40.0;
            assert!((r.value_at(t) - f.value_at(t)).abs() < 1e-14);
        }
    }
}
