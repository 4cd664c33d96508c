//! Discrete solution operator for `u_tt + F u_xxxx + G u_t = g`.
//!
//! Space: five-point fourth difference with hinged ends (`u = u_xx = 0`) or
//! periodic wrap. Time: Newmark average acceleration (`β = 1/4`, `γ = 1/2`)
//! with `G u_t` inside the implicit update. Each step solves
//!
//! ```text
//! (I + γ dt G + β dt² F D4) a¹ = g¹ − F D4 ũ − G ṽ
//! ũ = u⁰ + dt v⁰ + dt²/4 a⁰,  ṽ = v⁰ + dt/2 a⁰
//! ```

use crate::error::{Error, Result};
use crate::model::{h2_norm, l2_norm, DiscreteProblem, Field, Grid, SpaceTimeField, TimeAxis};
use std::io::{Read, Write};
use std::path::Path;

const BETA: f64 = 0.25;
const GAMMA: f64 = 0.5;

/// Relative boundary-zone threshold of the quiescence monitor.
pub const QUIESCENCE_TOL: f64 = 1e-6;

/// Displacement and velocity at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StateHistory {
    pub grid: Grid,
    pub axis: TimeAxis,
    pub u: SpaceTimeField,
    pub ut: SpaceTimeField,
}

impl StateHistory {
    pub fn zeros(grid: Grid, axis: TimeAxis) -> Self {
        Self { grid, axis, u: SpaceTimeField::zeros(grid, axis), ut: SpaceTimeField::zeros(grid, axis) }
    }

    pub fn u_row(&self, n: usize) -> &[f64] {
        self.u.row(n)
    }

    pub fn ut_row(&self, n: usize) -> &[f64] {
        self.ut.row(n)
    }

    /// `‖u(t_n)‖_{H²} + ‖u_t(t_n)‖_{L²}` per level.
    pub fn graph_norms(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        (0..self.axis.levels()).map(|n| h2_norm(self.u.row(n), dx) + l2_norm(self.ut.row(n), dx)).collect()
    }

    /// Graph norms of `self − other` per level.
    pub fn graph_norms_of_difference(&self, other: &StateHistory) -> Vec<f64> {
        let dx = self.grid.dx();
        let mut du = vec![0.0; self.grid.nx];
        let mut dv = vec![0.0; self.grid.nx];
        (0..self.axis.levels())
            .map(|n| {
                for i in 0..du.len() {
                    du[i] = self.u.row(n)[i] - other.u.row(n)[i];
                    dv[i] = self.ut.row(n)[i] - other.ut.row(n)[i];
                }
                h2_norm(&du, dx) + l2_norm(&dv, dx)
            })
            .collect()
    }

    /// `L²` norms of `u(t_n)` per level.
    pub fn l2_norms(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        (0..self.axis.levels()).map(|n| l2_norm(self.u.row(n), dx)).collect()
    }
}

/// Supplies `F` and `G` at each time level.
pub trait Coefficients {
    fn fill(&self, n: usize, f: &mut [f64], g: &mut [f64]);

    /// Load position at level `n`, used by the reassembly cadence.
    fn position(&self, _n: usize) -> f64 {
        0.0
    }
}

/// `F ≡ 1`, `G ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitCoefficients;

impl Coefficients for UnitCoefficients {
    fn fill(&self, _n: usize, f: &mut [f64], g: &mut [f64]) {
        f.iter_mut().for_each(|v| *v = 1.0);
        g.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Explicit `F`, `G` fields over time.
#[derive(Debug, Clone)]
pub struct CoefficientHistory {
    pub f: SpaceTimeField,
    pub g: SpaceTimeField,
}

impl Coefficients for CoefficientHistory {
    fn fill(&self, n: usize, f: &mut [f64], g: &mut [f64]) {
        f.copy_from_slice(self.f.row(n));
        g.copy_from_slice(self.g.row(n));
    }
}

impl Coefficients for DiscreteProblem {
    fn fill(&self, n: usize, f: &mut [f64], g: &mut [f64]) {
        self.fill_coefficients(n, f, g);
    }

    fn position(&self, n: usize) -> f64 {
        self.path[n].zeta
    }
}

/// Supplies the right-hand side `g` at each time level.
pub trait Forcing {
    fn fill(&self, n: usize, out: &mut [f64]);
}

impl Forcing for SpaceTimeField {
    fn fill(&self, n: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(n));
    }
}

/// `g ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn fill(&self, _n: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// `u = u_xx = 0` at both end points.
    Hinged,
    /// Period `x_max − x_min`; the last grid point duplicates the first.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reassembly {
    /// Coefficients refreshed and matrix refactored at every step.
    EveryStep,
    /// Coefficients frozen until the load moves more than `dx/2`.
    Cadence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub boundary: Boundary,
    pub reassembly: Reassembly,
    /// Points per side in the monitored boundary zone; `None` disables it.
    pub quiescence_zone: Option<usize>,
}

impl SolverOptions {
    /// Hinged, per-step reassembly, monitor on the outer 5% of the grid.
    pub fn standard(grid: &Grid) -> Self {
        Self {
            boundary: Boundary::Hinged,
            reassembly: Reassembly::EveryStep,
            quiescence_zone: Some((grid.nx / 20).max(4)),
        }
    }

    pub fn unmonitored() -> Self {
        Self { boundary: Boundary::Hinged, reassembly: Reassembly::EveryStep, quiescence_zone: None }
    }

    pub fn periodic() -> Self {
        Self { boundary: Boundary::Periodic, reassembly: Reassembly::EveryStep, quiescence_zone: None }
    }
}

/// Solves with [`SolverOptions::standard`].
pub fn solve_linear(
    coeffs: &dyn Coefficients,
    g: &dyn Forcing,
    u0: &Field,
    u1: &Field,
    axis: TimeAxis,
) -> Result<StateHistory> {
    LinearSolver::new(SolverOptions::standard(&u0.grid)).solve(coeffs, g, u0, u1, axis)
}

// ---------------------------------------------------------------- band LU

/// Pentadiagonal matrix, row `i` stores columns `i−2..=i+2`.
#[derive(Debug, Clone)]
struct Band5 {
    rows: Vec<[f64; 5]>,
}

impl Band5 {
    fn factor(&mut self) -> Result<()> {
        let n = self.rows.len();
        for k in 0..n {
            let pivot = self.rows[k][2];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularMatrix { row: k });
            }
            for i in k + 1..(k + 3).min(n) {
                let l = self.rows[i][k + 2 - i] / pivot;
                self.rows[i][k + 2 - i] = l;
                for j in k + 1..(k + 3).min(n) {
                    let u = self.rows[k][j + 2 - k];
                    self.rows[i][j + 2 - i] -= l * u;
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.rows.len();
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(2)..i {
                s -= self.rows[i][k + 2 - i] * b[k];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + 3).min(n) {
                s -= self.rows[i][j + 2 - i] * b[j];
            }
            b[i] = s / self.rows[i][2];
        }
    }
}

/// Dense 4×4 LU with partial pivoting.
#[derive(Debug, Clone)]
struct Small4 {
    lu: [[f64; 4]; 4],
    perm: [usize; 4],
}

impl Small4 {
    fn new(mut a: [[f64; 4]; 4]) -> Result<Self> {
        let mut perm = [0, 1, 2, 3];
        for k in 0..4 {
            let p = (k..4).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap_or(k);
            if a[p][k] == 0.0 || !a[p][k].is_finite() {
                return Err(Error::SingularMatrix { row: k });
            }
            a.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..4 {
                a[i][k] /= a[k][k];
                for j in k + 1..4 {
                    a[i][j] -= a[i][k] * a[k][j];
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    fn solve(&self, b: [f64; 4]) -> [f64; 4] {
        let mut y = [0.0; 4];
        for i in 0..4 {
            y[i] = b[self.perm[i]];
            for k in 0..i {
                y[i] -= self.lu[i][k] * y[k];
            }
        }
        for i in (0..4).rev() {
            for k in i + 1..4 {
                y[i] -= self.lu[i][k] * y[k];
            }
            y[i] /= self.lu[i][i];
        }
        y
    }
}

/// Factored step matrix for one set of coefficients.
#[derive(Debug, Clone)]
pub struct LinearStepOperator {
    band: Band5,
    boundary: Boundary,
    /// Periodic corner correction: rows `S`, `Z = B⁻¹U`, `W_S`, `(I + W_S Z_S)⁻¹`.
    wrap: Option<Wrap>,
}

#[derive(Debug, Clone)]
struct Wrap {
    idx: [usize; 4],
    z: Vec<[f64; 4]>,
    w: [[f64; 4]; 4],
    cap: Small4,
}

impl LinearStepOperator {
    /// Assembles and factors `I + γ dt G + β dt² F D4`.
    fn assemble(f: &[f64], g: &[f64], dx: f64, dt: f64, boundary: Boundary) -> Result<Self> {
        let c0 = BETA * dt * dt / dx.powi(4);
        match boundary {
            Boundary::Hinged => {
                let n = f.len();
                let mut rows = vec![[0.0; 5]; n];
                rows[0][2] = 1.0;
                rows[n - 1][2] = 1.0;
                for i in 1..n - 1 {
                    let c = c0 * f[i];
                    let d = 1.0 + GAMMA * dt * g[i];
                    rows[i] = if i == 1 {
                        [0.0, -2.0 * c, d + 5.0 * c, -4.0 * c, c]
                    } else if i == n - 2 {
                        [c, -4.0 * c, d + 5.0 * c, -2.0 * c, 0.0]
                    } else {
                        [c, -4.0 * c, d + 6.0 * c, -4.0 * c, c]
                    };
                }
                let mut band = Band5 { rows };
                band.factor()?;
                Ok(Self { band, boundary, wrap: None })
            }
            Boundary::Periodic => {
                let m = f.len() - 1;
                let full: Vec<[f64; 5]> = (0..m)
                    .map(|i| {
                        let c = c0 * f[i];
                        [c, -4.0 * c, 1.0 + GAMMA * dt * g[i] + 6.0 * c, -4.0 * c, c]
                    })
                    .collect();
                let mut rows = full.clone();
                for (i, r) in rows.iter_mut().enumerate() {
                    for (k, v) in r.iter_mut().enumerate() {
                        let j = i as i64 + k as i64 - 2;
                        if j < 0 || j >= m as i64 {
                            *v = 0.0;
                        }
                    }
                }
                let mut band = Band5 { rows };
                band.factor()?;
                let idx = [0, 1, m - 2, m - 1];
                // wrap-around entries of row idx[r] restricted to columns idx
                let mut w = [[0.0; 4]; 4];
                for (r, &i) in idx.iter().enumerate() {
                    for k in 0..5 {
                        let j = i as i64 + k as i64 - 2;
                        if j < 0 || j >= m as i64 {
                            let jw = j.rem_euclid(m as i64) as usize;
                            let col = idx.iter().position(|&s| s == jw).expect("wrap column in corner set");
                            w[r][col] += full[i][k];
                        }
                    }
                }
                let mut z = vec![[0.0; 4]; m];
                for c in 0..4 {
                    let mut e = vec![0.0; m];
                    e[idx[c]] = 1.0;
                    band.solve(&mut e);
                    for i in 0..m {
                        z[i][c] = e[i];
                    }
                }
                let mut cap = [[0.0; 4]; 4];
                for r in 0..4 {
                    for c in 0..4 {
                        cap[r][c] = if r == c { 1.0 } else { 0.0 };
                        for q in 0..4 {
                            cap[r][c] += w[r][q] * z[idx[q]][c];
                        }
                    }
                }
                let cap = Small4::new(cap)?;
                Ok(Self { band, boundary, wrap: Some(Wrap { idx, z, w, cap }) })
            }
        }
    }

    /// Solves in place; for periodic grids only the first `nx − 1` entries
    /// are unknowns and the last is set equal to the first.
    fn solve(&self, b: &mut [f64]) {
        match (&self.boundary, &self.wrap) {
            (Boundary::Periodic, Some(wrap)) => {
                let m = b.len() - 1;
                let y = &mut b[..m];
                self.band.solve(y);
                let mut c = [0.0; 4];
                for r in 0..4 {
                    for q in 0..4 {
                        c[r] += wrap.w[r][q] * y[wrap.idx[q]];
                    }
                }
                let d = wrap.cap.solve(c);
                for i in 0..m {
                    let z = &wrap.z[i];
                    y[i] -= z[0] * d[0] + z[1] * d[1] + z[2] * d[2] + z[3] * d[3];
                }
                b[m] = b[0];
            }
            _ => self.band.solve(b),
        }
    }
}

/// Applies the fourth-difference operator matching `boundary`.
pub fn apply_d4(u: &[f64], dx: f64, boundary: Boundary, out: &mut [f64]) {
    let n = u.len();
    let s = 1.0 / dx.powi(4);
    match boundary {
        Boundary::Hinged => {
            out[0] = 0.0;
            out[n - 1] = 0.0;
            out[1] = s * (-2.0 * u[0] + 5.0 * u[1] - 4.0 * u[2] + u[3]);
            out[n - 2] = s * (u[n - 4] - 4.0 * u[n - 3] + 5.0 * u[n - 2] - 2.0 * u[n - 1]);
            for i in 2..n - 2 {
                out[i] = s * (u[i - 2] - 4.0 * u[i - 1] + 6.0 * u[i] - 4.0 * u[i + 1] + u[i + 2]);
            }
        }
        Boundary::Periodic => {
            let m = n - 1;
            for i in 0..m {
                let at = |k: i64| u[(i as i64 + k).rem_euclid(m as i64) as usize];
                out[i] = s * (at(-2) - 4.0 * at(-1) + 6.0 * u[i] - 4.0 * at(1) + at(2));
            }
            out[m] = out[0];
        }
    }
}

/// Newmark time stepper with configurable boundary, cadence and monitor.
#[derive(Debug, Clone, Copy)]
pub struct LinearSolver {
    pub options: SolverOptions,
}

impl LinearSolver {
    pub fn new(options: SolverOptions) -> Self {
        Self { options }
    }

    pub fn solve(
        &self,
        coeffs: &dyn Coefficients,
        forcing: &dyn Forcing,
        u0: &Field,
        u1: &Field,
        axis: TimeAxis,
    ) -> Result<StateHistory> {
        let grid = u0.grid;
        if u1.grid != grid {
            return Err(Error::GridMismatch("u0 and u1 live on different grids".into()));
        }
        let nx = grid.nx;
        let dx = grid.dx();
        let dt = axis.dt();
        let boundary = self.options.boundary;
        if u0.values.iter().chain(&u1.values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        if boundary == Boundary::Hinged
            && (u0.values[0] != 0.0 || u0.values[nx - 1] != 0.0 || u1.values[0] != 0.0 || u1.values[nx - 1] != 0.0)
        {
            return Err(Error::MarginViolation("initial data must vanish at the hinged end points".into()));
        }

        let mut hist = StateHistory::zeros(grid, axis);
        let mut u = u0.values.clone();
        let mut v = u1.values.clone();
        if boundary == Boundary::Periodic {
            u[nx - 1] = u[0];
            v[nx - 1] = v[0];
        }
        hist.u.row_mut(0).copy_from_slice(&u);
        hist.ut.row_mut(0).copy_from_slice(&v);

        let mut f = vec![1.0; nx];
        let mut g = vec![0.0; nx];
        let mut rhs = vec![0.0; nx];
        let mut d4 = vec![0.0; nx];
        let mut a = vec![0.0; nx];
        let mut u_pred = vec![0.0; nx];
        let mut v_pred = vec![0.0; nx];

        coeffs.fill(0, &mut f, &mut g);
        forcing.fill(0, &mut rhs);
        apply_d4(&u, dx, boundary, &mut d4);
        for i in 0..nx {
            a[i] = rhs[i] - f[i] * d4[i] - g[i] * v[i];
        }
        if boundary == Boundary::Hinged {
            a[0] = 0.0;
            a[nx - 1] = 0.0;
        }

        let mut op: Option<LinearStepOperator> = None;
        let mut assembled_at = f64::NAN;
        let mut interior_max = 0.0f64;
        let zone = self.options.quiescence_zone.filter(|_| boundary == Boundary::Hinged);

        for n in 0..axis.nt {
            let refresh = match self.options.reassembly {
                Reassembly::EveryStep => true,
                Reassembly::Cadence => op.is_none() || (coeffs.position(n + 1) - assembled_at).abs() > 0.5 * dx,
            };
            if refresh {
                coeffs.fill(n + 1, &mut f, &mut g);
                op = Some(LinearStepOperator::assemble(&f, &g, dx, dt, boundary)?);
                assembled_at = coeffs.position(n + 1);
            }
            for i in 0..nx {
                u_pred[i] = u[i] + dt * v[i] + (0.5 - BETA) * dt * dt * a[i];
                v_pred[i] = v[i] + (1.0 - GAMMA) * dt * a[i];
            }
            forcing.fill(n + 1, &mut rhs);
            apply_d4(&u_pred, dx, boundary, &mut d4);
            for i in 0..nx {
                rhs[i] -= f[i] * d4[i] + g[i] * v_pred[i];
            }
            if boundary == Boundary::Hinged {
                rhs[0] = 0.0;
                rhs[nx - 1] = 0.0;
            }
            op.as_ref().expect("operator assembled").solve(&mut rhs);
            std::mem::swap(&mut a, &mut rhs);
            for i in 0..nx {
                u[i] = u_pred[i] + BETA * dt * dt * a[i];
                v[i] = v_pred[i] + GAMMA * dt * a[i];
            }
            if u.iter().chain(&v).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { step: n + 1 });
            }
            if let Some(z) = zone {
                let z = z.min(nx / 2 - 1);
                let zone_max = u[..z].iter().chain(&u[nx - z..]).fold(0.0f64, |m, x| m.max(x.abs()));
                interior_max = u[z..nx - z].iter().fold(interior_max, |m, x| m.max(x.abs()));
                if zone_max > QUIESCENCE_TOL * interior_max.max(1e-200) {
                    return Err(Error::Quiescence { step: n + 1, zone_max, interior_max });
                }
            }
            hist.u.row_mut(n + 1).copy_from_slice(&u);
            hist.ut.row_mut(n + 1).copy_from_slice(&v);
        }
        Ok(hist)
    }
}

/// `max_n (‖u‖_{H²} + ‖u_t‖) / (‖u₀‖_{H²} + ‖u₁‖ + ‖g‖_{L²(0,t_n;L²)} + 1e−14)`.
pub fn estimate_ratio(h: &StateHistory, u0: &Field, u1: &Field, g: &SpaceTimeField) -> f64 {
    let data = u0.h2_norm() + u1.l2_norm();
    let gn = g.cumulative_l2l2();
    h.graph_norms().iter().zip(&gn).map(|(num, gi)| num / (data + gi + 1e-14)).fold(0.0, f64::max)
}

const MAGIC: &[u8; 8] = b"GBEAMCK\0";
const VERSION: u32 = 1;

/// Writes a little-endian binary checkpoint of `h`.
pub fn write_checkpoint(h: &StateHistory, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + 16 * h.u.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&h.grid.x_min.to_le_bytes());
    buf.extend_from_slice(&h.grid.x_max.to_le_bytes());
    buf.extend_from_slice(&(h.grid.nx as u64).to_le_bytes());
    buf.extend_from_slice(&h.axis.t_final.to_le_bytes());
    buf.extend_from_slice(&(h.axis.nt as u64).to_le_bytes());
    for v in h.u.values.iter().chain(&h.ut.values) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint(path: &Path) -> Result<StateHistory> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut at = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(at..at + n).ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        at += n;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let f = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
    let x_min = f(take(8)?);
    let x_max = f(take(8)?);
    let nx = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let t_final = f(take(8)?);
    let nt = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let grid = Grid::new(x_min, x_max, nx)?;
    let axis = TimeAxis::new(t_final, nt)?;
    let count = nx * axis.levels();
    let mut hist = StateHistory::zeros(grid, axis);
    for dst in [&mut hist.u.values, &mut hist.ut.values] {
        for slot in dst.iter_mut().take(count) {
            *slot = f(take(8)?);
        }
    }
    if at != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(hist)
}
