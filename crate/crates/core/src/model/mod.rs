//! Grids, sampled fields, scenario data and the coefficient fields of the
//! regularized problem.

mod problem;
mod scenario;

pub use problem::{DiscreteProblem, PathSample};
pub use scenario::{
    coefficient_f, coefficient_g, forcing_h, mollify_initial_data, LambdaMode, RegularizationParams, Scenario,
    ScenarioSource, StopMetric, TruncationMode,
};

use crate::error::{Error, Result};
use serde::Serialize;

/// Uniform spatial grid `x_i = x_min + i dx`, `i = 0..nx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if nx < 16 {
            return Err(Error::InvalidGrid(format!("need nx >= 16, got {nx}")));
        }
        Ok(Self { x_min, x_max, nx })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Index of the last grid point at or left of `x`, clamped to the grid.
    pub fn floor_index(&self, x: f64) -> usize {
        let s = ((x - self.x_min) / self.dx()).floor();
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.nx - 1)
        }
    }

    /// True when both grids share spacing to relative 1e-12.
    pub fn same_spacing(&self, dx: f64) -> bool {
        (self.dx() - dx).abs() <= 1e-12 * dx.abs().max(self.dx().abs())
    }
}

/// Uniform time axis `t_n = n dt`, `n = 0..=nt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeAxis {
    pub t_final: f64,
    pub nt: usize,
}

impl TimeAxis {
    pub fn new(t_final: f64, nt: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidAxis(format!("need T > 0, got {t_final}")));
        }
        if nt < 2 {
            return Err(Error::InvalidAxis(format!("need nt >= 2, got {nt}")));
        }
        Ok(Self { t_final, nt })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Number of stored time levels, `nt + 1`.
    pub fn levels(&self) -> usize {
        self.nt + 1
    }
}

/// A function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nx {
            return Err(Error::GridMismatch(format!("field has {} values, grid has {} points", values.len(), grid.nx)));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite field value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.nx] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: (0..grid.nx).map(|i| f(grid.x(i))).collect() }
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values, self.grid.dx())
    }

    pub fn h2_norm(&self) -> f64 {
        h2_norm(&self.values, self.grid.dx())
    }
}

/// Space-time samples stored row-major, one row per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub axis: TimeAxis,
    pub values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: Grid, axis: TimeAxis) -> Self {
        Self { grid, axis, values: vec![0.0; grid.nx * axis.levels()] }
    }

    pub fn from_fn(grid: Grid, axis: TimeAxis, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, axis);
        for n in 0..axis.levels() {
            let t = axis.time(n);
            for (i, v) in out.row_mut(n).iter_mut().enumerate() {
                *v = f(t, grid.x(i));
            }
        }
        out
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[n * nx..(n + 1) * nx]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        let nx = self.grid.nx;
        &mut self.values[n * nx..(n + 1) * nx]
    }

    /// `‖g‖_{L²(0,t_n;L²)}` for every level `n`, trapezoid in time.
    pub fn cumulative_l2l2(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        let dt = self.axis.dt();
        let sq: Vec<f64> = (0..self.axis.levels()).map(|n| l2_norm(self.row(n), dx).powi(2)).collect();
        let mut acc = 0.0;
        let mut out = vec![0.0; sq.len()];
        for n in 1..sq.len() {
            acc += 0.5 * dt * (sq[n - 1] + sq[n]);
            out[n] = acc.sqrt();
        }
        out
    }
}

/// Trapezoid quadrature of samples with spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Trapezoid quadrature of the product of two sample vectors.
pub fn trapezoid_dot(a: &[f64], b: &[f64], dx: f64) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]);
    for i in 1..n - 1 {
        s += a[i] * b[i];
    }
    s * dx
}

/// Discrete `L²` norm with trapezoid weights.
pub fn l2_norm(values: &[f64], dx: f64) -> f64 {
    trapezoid_dot(values, values, dx).sqrt()
}

/// Centered first difference; zero at the two end points.
pub fn first_difference(values: &[f64], dx: f64, out: &mut [f64]) {
    let n = values.len();
    out[0] = 0.0;
    out[n - 1] = 0.0;
    let c = 0.5 / dx;
    for i in 1..n - 1 {
        out[i] = c * (values[i + 1] - values[i - 1]);
    }
}

/// Three-point second difference; zero at the two end points.
pub fn second_difference(values: &[f64], dx: f64, out: &mut [f64]) {
    let n = values.len();
    out[0] = 0.0;
    out[n - 1] = 0.0;
    let c = 1.0 / (dx * dx);
    for i in 1..n - 1 {
        out[i] = c * (values[i + 1] - 2.0 * values[i] + values[i - 1]);
    }
}

/// Discrete `H²` norm `(‖f‖² + ‖f′‖² + ‖f″‖²)^{1/2}` from centered differences.
pub fn h2_norm(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    let mut s = 0.5 * (values[0].powi(2) + values[n - 1].powi(2));
    let c1 = 0.5 / dx;
    let c2 = 1.0 / (dx * dx);
    for i in 1..n - 1 {
        let d1 = c1 * (values[i + 1] - values[i - 1]);
        let d2 = c2 * (values[i + 1] - 2.0 * values[i] + values[i - 1]);
        s += values[i] * values[i] + d1 * d1 + d2 * d2;
    }
    (s * dx).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(1.0, 0.0, 32).is_err());
        assert!(Grid::new(0.0, 1.0, 15).is_err());
        assert!(TimeAxis::new(0.0, 10).is_err());
        assert!(TimeAxis::new(1.0, 1).is_err());
    }

    #[test]
    fn grid_spacing_and_coordinates() {
        let g = Grid::new(-1.0, 1.0, 21).unwrap();
        assert!((g.dx() - 0.1).abs() < 1e-15);
        assert_eq!(g.x(0), -1.0);
        assert!((g.x(20) - 1.0).abs() < 1e-14);
        assert_eq!(g.floor_index(0.05), 10);
        assert_eq!(g.floor_index(-5.0), 0);
    }

    #[test]
    fn norms_of_polynomials() {
        let g = Grid::new(0.0, 1.0, 1001).unwrap();
        let f = Field::from_fn(g, |x| x * x);
        // ∫x⁴ = 1/5, trapezoid error O(dx²)
        assert!((f.l2_norm().powi(2) - 0.2).abs() < 1e-6);
        // interior: x⁴ + 4x² + 4 integrates to 1/5 + 4/3 + 4
        let expect = 0.2 + 4.0 / 3.0 + 4.0;
        assert!((f.h2_norm().powi(2) - expect).abs() < 2e-2);
    }

    #[test]
    fn cumulative_l2l2_of_constant() {
        let g = Grid::new(0.0, 1.0, 101).unwrap();
        let a = TimeAxis::new(2.0, 20).unwrap();
        let s = SpaceTimeField::from_fn(g, a, |_, _| 3.0);
        let c = s.cumulative_l2l2();
        assert_eq!(c[0], 0.0);
        assert!((c[20] - (9.0f64 * 2.0).sqrt()).abs() < 1e-12);
    }
}
