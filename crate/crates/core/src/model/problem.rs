//! A scenario sampled on a grid and time axis for one regularization scale.

use super::scenario::{forcing_h, mollify_initial_data, Scenario};
use super::{Field, Grid, SpaceTimeField, TimeAxis};
use crate::error::{Error, Result};
use crate::kernels::{make_mollifier, make_truncation, Mollifier, PlacedKernel, Truncation};

/// Load path state at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub zeta: f64,
    pub zeta_dot: f64,
    pub zeta_ddot: f64,
    pub load: f64,
}

/// Everything the solvers and diagnostics need at scale `ε`: kernels,
/// load path samples, placed load kernels, `h^ε`, `νp` and mollified data.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub grid: Grid,
    pub axis: TimeAxis,
    pub scenario: Scenario,
    pub mollifier: Mollifier,
    pub truncation: Truncation,
    pub path: Vec<PathSample>,
    pub load_kernels: Vec<PlacedKernel>,
    pub h: SpaceTimeField,
    pub nu_p: Option<SpaceTimeField>,
    pub u0: Field,
    pub u1: Field,
    pub u0_eps: Field,
    pub u1_eps: Field,
}

impl DiscreteProblem {
    /// Samples `scenario` at scale `epsilon` with truncation radius `r`.
    ///
    /// The data and load path must stay `4ε` away from the grid ends.
    pub fn new(scenario: &Scenario, grid: Grid, axis: TimeAxis, epsilon: f64, r: f64) -> Result<Self> {
        let mollifier = make_mollifier(epsilon, grid.dx())?;
        let truncation = make_truncation(r)?;
        let times: Vec<f64> = (0..axis.levels()).map(|n| axis.time(n)).collect();
        scenario.check_support(&grid, &times, 4.0 * epsilon)?;

        let mut path = Vec::with_capacity(times.len());
        for (n, &t) in times.iter().enumerate() {
            let s = PathSample {
                zeta: scenario.zeta.eval(t, 0.0),
                zeta_dot: scenario.zeta_dot.eval(t, 0.0),
                zeta_ddot: scenario.zeta_ddot.eval(t, 0.0),
                load: scenario.load.eval(t, 0.0),
            };
            if ![s.zeta, s.zeta_dot, s.zeta_ddot, s.load].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidScenario(format!("load path or load not finite at step {n}")));
            }
            path.push(s);
        }
        let load_kernels: Vec<PlacedKernel> = path.iter().map(|s| mollifier.place(&grid, s.zeta)).collect();

        let mut h = SpaceTimeField::zeros(grid, axis);
        for (n, &t) in times.iter().enumerate() {
            h.row_mut(n).copy_from_slice(&forcing_h(scenario, &mollifier, &grid, t).values);
        }
        let nu_p = if scenario.traction.is_zero() || scenario.nu == 0.0 {
            None
        } else {
            let nu = scenario.nu;
            Some(SpaceTimeField::from_fn(grid, axis, |t, x| nu * scenario.traction.eval(t, x)))
        };
        if h.values.iter().any(|v| !v.is_finite())
            || nu_p.as_ref().is_some_and(|p| p.values.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidScenario("forcing or traction not finite on the grid".into()));
        }

        let (u0_eps, u1_eps) = mollify_initial_data(scenario, &mollifier, &grid)?;
        Ok(Self {
            grid,
            axis,
            scenario: scenario.clone(),
            mollifier,
            truncation,
            path,
            load_kernels,
            h,
            nu_p,
            u0: Field::from_fn(grid, |x| scenario.u0.eval(0.0, x)),
            u1: Field::from_fn(grid, |x| scenario.u1.eval(0.0, x)),
            u0_eps,
            u1_eps,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.mollifier.epsilon()
    }

    /// Fills `F` and `G` at level `n`; `F = 1`, `G = 0` without the mass term.
    pub fn fill_coefficients(&self, n: usize, f: &mut [f64], g: &mut [f64]) {
        f.iter_mut().for_each(|v| *v = 1.0);
        g.iter_mut().for_each(|v| *v = 0.0);
        if !self.scenario.mass_term_enabled {
            return;
        }
        let k = &self.load_kernels[n];
        let zd = self.path[n].zeta_dot;
        for (j, (&th, &dth)) in k.value.iter().zip(&k.slope).enumerate() {
            let i = k.start + j;
            f[i] = 1.0 / (1.0 + th);
            g[i] = -zd * dth * f[i];
        }
    }

    /// Moving-kernel values at level `n` as a full grid vector, zero when the
    /// mass term is disabled.
    pub fn mass_kernel(&self, n: usize) -> Vec<f64> {
        if self.scenario.mass_term_enabled {
            self.load_kernels[n].values_on(self.grid.nx)
        } else {
            vec![0.0; self.grid.nx]
        }
    }

    /// `f(t_n, x_i)`.
    pub fn distributed_row(&self, n: usize, out: &mut [f64]) {
        let t = self.axis.time(n);
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.scenario.distributed.eval(t, self.grid.x(i));
        }
    }

    /// `ν p_x(t_n, x_i)`.
    pub fn nu_p_x_row(&self, n: usize, out: &mut [f64]) {
        let t = self.axis.time(n);
        let nu = self.scenario.nu;
        for (i, v) in out.iter_mut().enumerate() {
            *v = nu * self.scenario.traction_x.eval(t, self.grid.x(i));
        }
    }
}
