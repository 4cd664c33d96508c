//! Windowed Fourier Sobolev norms and cubic traces along a path.

use crate::error::{Error, Result};
use crate::linear_solver::StateHistory;
use crate::model::{Field, Grid};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

/// Order `s` and window `K = [a, b]` of a localized `H^s` norm. The window
/// is 1 on `[a + taper, b − taper]` and falls smoothly to 0 at `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevNormSpec {
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub taper: f64,
}

impl SobolevNormSpec {
    fn validate(&self, grid: &Grid) -> Result<()> {
        if !(0.0..=2.0).contains(&self.s) {
            return Err(Error::InvalidGrid(format!("Sobolev order {} outside [0, 2]", self.s)));
        }
        if !(self.a > grid.x_min && self.b < grid.x_max && self.a < self.b) {
            return Err(Error::WindowOutsideGrid { a: self.a, b: self.b });
        }
        if !(self.taper >= 0.0 && 2.0 * self.taper <= self.b - self.a) {
            return Err(Error::InvalidGrid(format!("taper {} too wide for window", self.taper)));
        }
        Ok(())
    }
}

/// `C^∞` step: 0 for `y ≤ 0`, 1 for `y ≥ 1`.
fn smooth_step(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    let p = (-1.0 / y).exp();
    let q = (-1.0 / (1.0 - y)).exp();
    p / (p + q)
}

/// Window value at `x`.
pub fn window(spec: &SobolevNormSpec, x: f64) -> f64 {
    if x <= spec.a || x >= spec.b {
        return 0.0;
    }
    if spec.taper == 0.0 {
        return 1.0;
    }
    smooth_step((x - spec.a) / spec.taper) * smooth_step((spec.b - x) / spec.taper)
}

/// Reusable FFT plan for repeated norms on one window.
pub struct SobolevNorm {
    spec: SobolevNormSpec,
    dx: f64,
    start: usize,
    weights: Vec<f64>,
    symbol: Vec<f64>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl SobolevNorm {
    pub fn new(grid: &Grid, spec: SobolevNormSpec) -> Result<Self> {
        spec.validate(grid)?;
        let dx = grid.dx();
        let start = ((spec.a - grid.x_min) / dx).ceil() as usize;
        let end = (((spec.b - grid.x_min) / dx).floor() as usize).min(grid.nx - 1);
        let weights: Vec<f64> = (start..=end).map(|i| window(&spec, grid.x(i))).collect();
        let n = (2 * weights.len()).next_power_of_two();
        let len = n as f64 * dx;
        let symbol = (0..n)
            .map(|j| {
                let k = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                let xi = 2.0 * std::f64::consts::PI * k / len;
                (1.0 + xi * xi).powf(spec.s)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self { spec, dx, start, weights, symbol, fft })
    }

    pub fn spec(&self) -> &SobolevNormSpec {
        &self.spec
    }

    /// Norm of grid samples `values`.
    pub fn eval(&self, values: &[f64]) -> f64 {
        let n = self.symbol.len();
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for (k, w) in self.weights.iter().enumerate() {
            buf[k].re = w * values[self.start + k];
        }
        self.fft.process(&mut buf);
        let len = n as f64 * self.dx;
        let sum: f64 = buf.iter().zip(&self.symbol).map(|(c, s)| s * c.norm_sqr()).sum();
        (self.dx * self.dx / len * sum).sqrt()
    }
}

/// `(Σ_j (1+ξ_j²)^s |f̂_j|² Δξ)^{1/2}` of the windowed, zero-extended field.
pub fn sobolev_norm(f: &Field, spec: SobolevNormSpec) -> Result<f64> {
    Ok(SobolevNorm::new(&f.grid, spec)?.eval(&f.values))
}

/// Quantity sampled along the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    U,
    Ut,
    Ux,
}

/// Cubic Lagrange interpolation of grid samples (or of its derivative when
/// `derivative` is set) at `x`. `None` outside the grid.
pub fn interpolate(values: &[f64], grid: &Grid, x: f64, derivative: bool) -> Option<f64> {
    if !(x >= grid.x_min && x <= grid.x_max) {
        return None;
    }
    let dx = grid.dx();
    let i = grid.floor_index(x).clamp(1, grid.nx - 3);
    let s = (x - grid.x(i)) / dx;
    let w = if derivative {
        [
            -(3.0 * s * s - 6.0 * s + 2.0) / 6.0 / dx,
            (3.0 * s * s - 4.0 * s - 1.0) / 2.0 / dx,
            -(3.0 * s * s - 2.0 * s - 2.0) / 2.0 / dx,
            (3.0 * s * s - 1.0) / 6.0 / dx,
        ]
    } else {
        [
            -s * (s - 1.0) * (s - 2.0) / 6.0,
            (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
            -(s + 1.0) * s * (s - 2.0) / 2.0,
            (s + 1.0) * s * (s - 1.0) / 6.0,
        ]
    };
    Some(w[0] * values[i - 1] + w[1] * values[i] + w[2] * values[i + 1] + w[3] * values[i + 2])
}

/// `u`, `u_t` or `u_x` at `x = path[n]` for every level `n`.
pub fn trace(h: &StateHistory, path: &[f64], which: TraceKind) -> Result<Vec<f64>> {
    path.iter()
        .enumerate()
        .take(h.axis.levels())
        .map(|(n, &x)| {
            let v = match which {
                TraceKind::U => interpolate(h.u_row(n), &h.grid, x, false),
                TraceKind::Ut => interpolate(h.ut_row(n), &h.grid, x, false),
                TraceKind::Ux => interpolate(h.u_row(n), &h.grid, x, true),
            };
            v.ok_or(Error::PathOutsideGrid { step: n, x })
        })
        .collect()
}
