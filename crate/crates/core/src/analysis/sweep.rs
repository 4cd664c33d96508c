//! Runs along a decreasing `ε` ladder and their pairwise Cauchy differences.

use super::energy::{energy_ledger, uniform_bound_check, EnergyLedger};
use super::norms::{SobolevNorm, SobolevNormSpec};
use super::weak::{
    default_battery, dirac_ibp_identities, initial_datum_check, weak_residuals_limit, weak_residuals_regularized,
    Quadrature, TestFunction,
};
use crate::error::{Error, Result};
use crate::fixed_point::{picard_solve_problem, resolve_r, PicardReport};
use crate::kernels::{convolve_into, Order};
use crate::linear_solver::{SolverOptions, StateHistory};
use crate::model::{first_difference, DiscreteProblem, Grid, RegularizationParams, Scenario, TimeAxis, TruncationMode};
use rayon::prelude::*;
use serde::Serialize;

/// Window and solver settings of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Compact set `K = [a, b]`; the central half of the grid when `None`.
    pub window: Option<(f64, f64)>,
    pub solver: Option<SolverOptions>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { window: None, solver: None }
    }
}

/// Everything computed for one ladder member.
#[derive(Debug, Clone)]
pub struct MemberRun {
    pub problem: DiscreteProblem,
    pub history: StateHistory,
    pub picard: PicardReport,
    pub ledger: EnergyLedger,
    pub weak_regularized: Vec<f64>,
    pub weak_limit: Vec<f64>,
    pub ibp: Vec<f64>,
    pub initial_datum: f64,
}

/// Serializable summary of one ladder member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberSummary {
    pub truncation_radius: f64,
    pub picard: PicardReport,
    pub sup_state_norm: f64,
    pub sup_l2: f64,
    pub initial_datum: f64,
    pub tau_residual_max: f64,
    pub min_nonlinear_mu: f64,
    pub min_concentrated: f64,
    pub weak_regularized: Vec<f64>,
    pub weak_limit: Vec<f64>,
    pub ibp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberReport {
    pub epsilon: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub summary: Option<MemberSummary>,
}

/// Differences between consecutive ladder members `ε_a > ε_b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub eps_a: f64,
    pub eps_b: f64,
    /// `sup_t ‖u_a − u_b‖_{H^{2−α}(K)}` for `α = 0.5`.
    pub h2alpha_diff: f64,
    /// Same for `α = 1`.
    pub h1_diff: f64,
    /// `max_{t, x ∈ K} |∂ₓu_a − ∂ₓu_b|`.
    pub linf_ux_diff: f64,
    /// `‖u_a ⋆ θ^{ε_a}′ − ∂ₓu_finest‖_{L²([0,T]×K)}`.
    pub l2_conv_diff: f64,
    /// Same difference for the cubes.
    pub cubic_diff: f64,
    /// `3 M² · l2_conv_diff` with `M` the larger sup of the two slopes on `K`.
    pub cubic_bound: f64,
    /// Largest regularized weak residual of member `b` over the battery.
    pub weak_regularized_residual: f64,
    /// Largest limit weak residual of member `b` over the battery.
    pub weak_limit_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub ladder: Vec<f64>,
    pub window: (f64, f64),
    pub battery: Vec<TestFunction>,
    pub members: Vec<MemberReport>,
    pub pairs: Vec<PairReport>,
    /// `max/median` of the sup state norms of the successful members.
    pub uniform_ratio: Option<f64>,
    #[serde(skip)]
    pub runs: Vec<Option<MemberRun>>,
}

impl SweepReport {
    pub fn all_ok(&self) -> bool {
        self.members.iter().all(|m| m.ok)
    }

    /// The run of the smallest successful `ε`.
    pub fn finest(&self) -> Option<&MemberRun> {
        self.runs.iter().rev().flatten().next()
    }
}

/// Solves and analyses a single member.
pub fn run_member(
    scn: &Scenario,
    reg: &RegularizationParams,
    grid: Grid,
    axis: TimeAxis,
    battery: &[TestFunction],
    solver: Option<SolverOptions>,
) -> Result<MemberRun> {
    reg.validate()?;
    let bound = match reg.truncation {
        TruncationMode::Auto { c_cap } => c_cap,
        TruncationMode::Explicit(r) => r * reg.epsilon,
    };
    let r = resolve_r(reg, reg.epsilon, bound);
    let problem = DiscreteProblem::new(scn, grid, axis, reg.epsilon, r)?;
    let options = solver.unwrap_or_else(|| SolverOptions::standard(&grid));
    let (history, picard) = picard_solve_problem(&problem, reg, options)?;
    let ledger = energy_ledger(&history, &problem);
    let weak_regularized = weak_residuals_regularized(&history, battery, &problem, Quadrature::Trapezoid)?;
    let weak_limit = weak_residuals_limit(&history, battery, &problem)?;
    let ibp = dirac_ibp_identities(&history, battery, &problem)?;
    let initial_datum = initial_datum_check(&history, scn);
    Ok(MemberRun { problem, history, picard, ledger, weak_regularized, weak_limit, ibp, initial_datum })
}

fn summarize(run: &MemberRun) -> MemberSummary {
    let min = |v: &[f64]| v.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    MemberSummary {
        truncation_radius: run.problem.truncation.r(),
        picard: run.picard.clone(),
        sup_state_norm: run.ledger.sup_state_norm(),
        sup_l2: run.history.l2_norms().into_iter().fold(0.0, f64::max),
        initial_datum: run.initial_datum,
        tau_residual_max: run.ledger.max_abs_tau_residual(),
        min_nonlinear_mu: min(&run.ledger.nonlinear_mu),
        min_concentrated: min(&run.ledger.concentrated),
        weak_regularized: run.weak_regularized.clone(),
        weak_limit: run.weak_limit.clone(),
        ibp: run.ibp.clone(),
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x))
}

/// Runs every ladder member (concurrently, merged in ladder order) and the
/// pairwise diagnostics between consecutive successful members.
pub fn epsilon_sweep(
    scn: &Scenario,
    ladder: &[f64],
    grid: Grid,
    axis: TimeAxis,
    reg: &RegularizationParams,
    options: SweepOptions,
) -> Result<SweepReport> {
    if ladder.is_empty() {
        return Err(Error::Config("empty epsilon ladder".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(format!("epsilon ladder {ladder:?} is not strictly decreasing")));
    }
    let len = grid.x_max - grid.x_min;
    let window = options.window.unwrap_or((grid.x_min + 0.25 * len, grid.x_max - 0.25 * len));
    let taper = 0.125 * (window.1 - window.0);
    let spec = SobolevNormSpec { s: 1.5, a: window.0, b: window.1, taper };
    let norm_15 = SobolevNorm::new(&grid, spec)?;
    let norm_1 = SobolevNorm::new(&grid, SobolevNormSpec { s: 1.0, ..spec })?;
    let battery = default_battery(scn.zeta.eval(0.0, 0.0), axis.t_final);

    let results: Vec<Result<MemberRun>> = ladder
        .par_iter()
        .map(|&eps| {
            let mut r = reg.clone();
            r.epsilon = eps;
            run_member(scn, &r, grid, axis, &battery, options.solver)
        })
        .collect();

    let mut members = Vec::with_capacity(ladder.len());
    let mut runs = Vec::with_capacity(ladder.len());
    for (&eps, res) in ladder.iter().zip(results) {
        match res {
            Ok(run) => {
                members.push(MemberReport { epsilon: eps, ok: true, error: None, summary: Some(summarize(&run)) });
                runs.push(Some(run));
            }
            Err(e) => {
                members.push(MemberReport { epsilon: eps, ok: false, error: Some(e.to_string()), summary: None });
                runs.push(None);
            }
        }
    }

    let ledgers: Vec<EnergyLedger> = runs.iter().flatten().map(|r| r.ledger.clone()).collect();
    let uniform_ratio = (!ledgers.is_empty()).then(|| uniform_bound_check(&ledgers));

    let (ka, kb) = (
        ((window.0 - grid.x_min) / grid.dx()).ceil() as usize,
        (((window.1 - grid.x_min) / grid.dx()).floor() as usize).min(grid.nx - 1),
    );
    let finest_slopes = runs.iter().rev().flatten().next().map(|f| slopes(&f.history));
    let mut pairs = Vec::new();
    for k in 1..runs.len() {
        let (Some(a), Some(b)) = (&runs[k - 1], &runs[k]) else { continue };
        let fine = finest_slopes.as_ref().expect("a successful member exists");
        pairs.push(pair_report(a, b, fine, &norm_15, &norm_1, (ka, kb)));
    }

    Ok(SweepReport { ladder: ladder.to_vec(), window, battery, members, pairs, uniform_ratio, runs })
}

/// Centered `u_x` at every level.
fn slopes(h: &StateHistory) -> Vec<Vec<f64>> {
    let dx = h.grid.dx();
    (0..h.axis.levels())
        .map(|n| {
            let mut d = vec![0.0; h.grid.nx];
            first_difference(h.u_row(n), dx, &mut d);
            d
        })
        .collect()
}

fn pair_report(
    a: &MemberRun,
    b: &MemberRun,
    finest: &[Vec<f64>],
    norm_15: &SobolevNorm,
    norm_1: &SobolevNorm,
    (ka, kb): (usize, usize),
) -> PairReport {
    let grid = a.history.grid;
    let axis = a.history.axis;
    let dx = grid.dx();
    let dt = axis.dt();
    let nx = grid.nx;
    let mut diff = vec![0.0; nx];
    let mut da = vec![0.0; nx];
    let mut db = vec![0.0; nx];
    let mut wa = vec![0.0; nx];
    let (mut h15, mut h1, mut linf) = (0.0f64, 0.0f64, 0.0f64);
    let mut sup = 0.0f64;
    let mut l2_rows = Vec::with_capacity(axis.levels());
    let mut cube_rows = Vec::with_capacity(axis.levels());
    for n in 0..axis.levels() {
        let (ua, ub) = (a.history.u_row(n), b.history.u_row(n));
        for i in 0..nx {
            diff[i] = ua[i] - ub[i];
        }
        h15 = h15.max(norm_15.eval(&diff));
        h1 = h1.max(norm_1.eval(&diff));
        first_difference(ua, dx, &mut da);
        first_difference(ub, dx, &mut db);
        convolve_into(ua, &a.problem.mollifier, Order::One, &mut wa);
        let uf = &finest[n];
        let (mut s2, mut c2) = (0.0, 0.0);
        for i in ka..=kb {
            linf = linf.max((da[i] - db[i]).abs());
            sup = sup.max(wa[i].abs()).max(uf[i].abs());
            let wgt = if i == ka || i == kb { 0.5 } else { 1.0 };
            s2 += wgt * (wa[i] - uf[i]).powi(2);
            c2 += wgt * (wa[i].powi(3) - uf[i].powi(3)).powi(2);
        }
        l2_rows.push(s2 * dx);
        cube_rows.push(c2 * dx);
    }
    let time_int = |rows: &[f64]| rows.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum::<f64>().sqrt();
    let l2 = time_int(&l2_rows);
    PairReport {
        eps_a: a.problem.epsilon(),
        eps_b: b.problem.epsilon(),
        h2alpha_diff: h15,
        h1_diff: h1,
        linf_ux_diff: linf,
        l2_conv_diff: l2,
        cubic_diff: time_int(&cube_rows),
        cubic_bound: 3.0 * sup * sup * l2,
        weak_regularized_residual: max_of(&b.weak_regularized),
        weak_limit_residual: max_of(&b.weak_limit),
    }
}
