//! Linear-solver verification runs: a manufactured smooth solution and
//! periodic plane waves.

use super::expr::{differentiate, Expression, Var};
use crate::error::Result;
use crate::linear_solver::{CoefficientHistory, LinearSolver, SolverOptions, StateHistory};
use crate::model::{trapezoid, Field, Grid, SpaceTimeField, TimeAxis};
use rayon::prelude::*;
use serde::Serialize;

/// Manufactured problem `u = P(x) cos t` for `u_tt + F u_xxxx + G u_t = g`
/// with `F = F(x)` and `G = D(x) sin t`, on `[−1, 3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManufacturedCase {
    pub profile: &'static str,
    pub stiffness: &'static str,
    pub damping: &'static str,
}

impl ManufacturedCase {
    /// `u = bump(x−1) cos t`, `F ≡ 1`, `G ≡ 0`.
    pub const UNIT: Self = Self { profile: "bump(x-1)", stiffness: "1", damping: "0" };
    /// Wider profile with variable stiffness and damping.
    pub const VARIABLE: Self = Self {
        profile: "exp(1)*bump((x-1)/1.8)",
        stiffness: "1/(1+0.5*bump((x-1)/1.5))",
        damping: "0.3*bump((x-1)/1.5)",
    };
}

/// Grid for the manufactured runs: `[−1, 3]` with `nx` points.
pub fn manufactured_grid(nx: usize) -> Result<Grid> {
    Grid::new(-1.0, 3.0, nx)
}

/// `max_n ‖u^n − u(t_n)‖_{L²}`, with `g` built symbolically from the exact solution.
pub fn manufactured_error(case: &ManufacturedCase, nx: usize, nt: usize, t_final: f64) -> Result<f64> {
    let grid = manufactured_grid(nx)?;
    let axis = TimeAxis::new(t_final, nt)?;
    let profile = Expression::parse(case.profile)?;
    let p4 = differentiate(&profile, Var::X, 4);
    let sample = |e: &Expression| -> Vec<f64> { (0..nx).map(|i| e.eval(0.0, grid.x(i))).collect() };
    let (p, p4) = (sample(&profile), sample(&p4));
    let f = sample(&Expression::parse(case.stiffness)?);
    let d = sample(&Expression::parse(case.damping)?);
    let idx = |x: f64| ((x - grid.x_min) / grid.dx()).round() as usize;
    let coeffs = CoefficientHistory {
        f: SpaceTimeField::from_fn(grid, axis, |_, x| f[idx(x)]),
        g: SpaceTimeField::from_fn(grid, axis, |t, x| d[idx(x)] * t.sin()),
    };
    let forcing = SpaceTimeField::from_fn(grid, axis, |t, x| {
        let i = idx(x);
        (f[i] * p4[i] - p[i]) * t.cos() - d[i] * p[i] * t.sin().powi(2)
    });
    let u0 = Field::new(grid, p.clone())?;
    let u1 = Field::zeros(grid);
    let h = LinearSolver::new(SolverOptions::unmonitored()).solve(&coeffs, &forcing, &u0, &u1, axis)?;
    Ok(max_error(&h, |t, i| p[i] * t.cos()))
}

fn max_error(h: &StateHistory, exact: impl Fn(f64, usize) -> f64) -> f64 {
    let dx = h.grid.dx();
    (0..h.axis.levels())
        .map(|n| {
            let t = h.axis.time(n);
            let sq: Vec<f64> = h.u_row(n).iter().enumerate().map(|(i, v)| (v - exact(t, i)).powi(2)).collect();
            trapezoid(&sq, dx).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Observed orders from a refinement ladder of errors, `log₂(e_k / e_{k+1})`.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Refinement ladders: space at a fixed fine `dt`, time at a fixed fine `dx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManufacturedPlan {
    pub t_final: f64,
    pub space_nx: Vec<usize>,
    pub space_nt: usize,
    pub time_nt: Vec<usize>,
    pub time_nx: usize,
}

impl ManufacturedPlan {
    /// Ladders in the asymptotic range of [`ManufacturedCase::UNIT`].
    pub fn unit() -> Self {
        Self { t_final: 1.0, space_nx: vec![641, 1281, 2561], space_nt: 1000, time_nt: vec![10, 20, 40], time_nx: 5121 }
    }

    /// Ladders for [`ManufacturedCase::VARIABLE`].
    pub fn variable() -> Self {
        Self { t_final: 1.0, space_nx: vec![321, 641, 1281], space_nt: 1000, time_nt: vec![10, 20, 40], time_nx: 2561 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManufacturedReport {
    pub case: ManufacturedCase,
    pub plan: ManufacturedPlan,
    pub space_errors: Vec<f64>,
    pub space_orders: Vec<f64>,
    pub time_errors: Vec<f64>,
    pub time_orders: Vec<f64>,
}

pub fn manufactured_study(case: &ManufacturedCase, plan: &ManufacturedPlan) -> Result<ManufacturedReport> {
    let space_errors = plan
        .space_nx
        .par_iter()
        .map(|&nx| manufactured_error(case, nx, plan.space_nt, plan.t_final))
        .collect::<Result<Vec<_>>>()?;
    let time_errors = plan
        .time_nt
        .par_iter()
        .map(|&nt| manufactured_error(case, plan.time_nx, nt, plan.t_final))
        .collect::<Result<Vec<_>>>()?;
    Ok(ManufacturedReport {
        case: *case,
        plan: plan.clone(),
        space_orders: observed_orders(&space_errors),
        time_orders: observed_orders(&time_errors),
        space_errors,
        time_errors,
    })
}

/// Relative phase error `|φ(T) − 2π| / 2π` after one period `T = 2π/k²` of
/// the plane wave `cos(kx)` on the periodic grid `[0, 2π]` with `m` cells.
pub fn plane_wave_phase_error(k: u32, m: usize, nt: usize) -> Result<f64> {
    let grid = Grid::new(0.0, 2.0 * std::f64::consts::PI, m + 1)?;
    let omega = f64::from(k * k);
    let period = 2.0 * std::f64::consts::PI / omega;
    let axis = TimeAxis::new(period, nt)?;
    let kf = f64::from(k);
    let u0 = Field::from_fn(grid, |x| (kf * x).cos());
    let u1 = Field::zeros(grid);
    let unit = CoefficientHistory {
        f: SpaceTimeField::from_fn(grid, axis, |_, _| 1.0),
        g: SpaceTimeField::from_fn(grid, axis, |_, _| 0.0),
    };
    let zero = SpaceTimeField::from_fn(grid, axis, |_, _| 0.0);
    let h = LinearSolver::new(SolverOptions::periodic()).solve(&unit, &zero, &u0, &u1, axis)?;
    let basis: Vec<f64> = (0..m).map(|i| (kf * grid.x(i)).cos()).collect();
    let project = |row: &[f64]| row[..m].iter().zip(&basis).map(|(a, b)| a * b).sum::<f64>() * 2.0 / m as f64;
    let mut phase = 0.0;
    let mut last = 0.0;
    for n in 0..axis.levels() {
        let c = project(h.u_row(n));
        let s = -project(h.ut_row(n)) / omega;
        let p = s.atan2(c);
        let mut step = p - last;
        while step < -std::f64::consts::PI {
            step += 2.0 * std::f64::consts::PI;
        }
        while step > std::f64::consts::PI {
            step -= 2.0 * std::f64::consts::PI;
        }
        phase += step;
        last = p;
    }
    Ok((phase - 2.0 * std::f64::consts::PI).abs() / (2.0 * std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_of_exact_halving() {
        let o = observed_orders(&[1.0, 0.25, 0.0625]);
        assert!(o.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn coarse_plane_wave_is_close() {
        assert!(plane_wave_phase_error(1, 64, 200).unwrap() < 0.01);
    }
}
