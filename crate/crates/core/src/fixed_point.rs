//! The map `C(v) = ([(φ^R(v⋆θ′) − νp)(v⋆θ″)]⋆θ + h)·F`, weighted norms,
//! and the Picard iteration `v_{k+1} = B(C(v_k))`.

use crate::error::{Error, Result};
use crate::kernels::{bump, convolve_into, Order};
use crate::linear_solver::{estimate_ratio, LinearSolver, SolverOptions, StateHistory};
use crate::model::{
    l2_norm, DiscreteProblem, Grid, LambdaMode, RegularizationParams, Scenario, SpaceTimeField, StopMetric, TimeAxis,
    TruncationMode,
};
use serde::Serialize;

/// Which per-step quantity the weighted norm takes the supremum of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormMode {
    /// `‖u(s)‖_{L²}`.
    Plain,
    /// `‖u(s)‖_{H²} + ‖u_t(s)‖_{L²}`.
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNormParams {
    pub lambda: f64,
    pub mode: NormMode,
}

/// `sup_{t_n ≤ t} e^{−λ t_n} series[n]`.
pub fn weighted_sup(series: &[f64], axis: &TimeAxis, lambda: f64, t: f64) -> f64 {
    let mut best = 0.0f64;
    for (n, &v) in series.iter().enumerate() {
        let s = axis.time(n);
        if s > t * (1.0 + 1e-12) + 1e-300 {
            break;
        }
        best = best.max((-lambda * s).exp() * v);
    }
    best
}

/// Weighted norm of a history in plain or graph mode up to time `t`.
pub fn weighted_norm(h: &StateHistory, params: WeightedNormParams, t: f64) -> f64 {
    let series = match params.mode {
        NormMode::Plain => h.l2_norms(),
        NormMode::Graph => h.graph_norms(),
    };
    weighted_sup(&series, &h.axis, params.lambda, t)
}

/// Scratch buffers for one row of the nonlinear map.
struct RowScratch {
    w1: Vec<f64>,
    w2: Vec<f64>,
    q: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl RowScratch {
    fn new(nx: usize) -> Self {
        Self { w1: vec![0.0; nx], w2: vec![0.0; nx], q: vec![0.0; nx], f: vec![0.0; nx], g: vec![0.0; nx] }
    }
}

/// `([(φ^R(u⋆θ′) − νp)(u⋆θ″)] ⋆ θ)` at level `n` written into `out`.
pub(crate) fn bracket_row(
    problem: &DiscreteProblem,
    u: &[f64],
    n: usize,
    w1: &mut [f64],
    w2: &mut [f64],
    q: &mut [f64],
    out: &mut [f64],
) {
    let m = &problem.mollifier;
    let trunc = &problem.truncation;
    let nu_p = problem.nu_p.as_ref().map(|p| p.row(n));
    if u.iter().all(|&v| v == 0.0) {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    convolve_into(u, m, Order::One, w1);
    convolve_into(u, m, Order::Two, w2);
    for i in 0..u.len() {
        let p = nu_p.map_or(0.0, |r| r[i]);
        q[i] = (trunc.phi(w1[i]) - p) * w2[i];
    }
    convolve_into(q, m, Order::Zero, out);
}

/// `C(v)` at every time level.
pub fn apply_c(v: &StateHistory, problem: &DiscreteProblem) -> SpaceTimeField {
    let nx = problem.grid.nx;
    let mut out = SpaceTimeField::zeros(problem.grid, problem.axis);
    let mut s = RowScratch::new(nx);
    let mut r = vec![0.0; nx];
    for n in 0..problem.axis.levels() {
        bracket_row(problem, v.u_row(n), n, &mut s.w1, &mut s.w2, &mut s.q, &mut r);
        problem.fill_coefficients(n, &mut s.f, &mut s.g);
        let h = problem.h.row(n);
        for (i, o) in out.row_mut(n).iter_mut().enumerate() {
            *o = (r[i] + h[i]) * s.f[i];
        }
    }
    out
}

/// `h^ε·F`, the map with its bracket dropped.
pub fn source_term(problem: &DiscreteProblem) -> SpaceTimeField {
    let nx = problem.grid.nx;
    let mut out = SpaceTimeField::zeros(problem.grid, problem.axis);
    let mut f = vec![0.0; nx];
    let mut g = vec![0.0; nx];
    for n in 0..problem.axis.levels() {
        problem.fill_coefficients(n, &mut f, &mut g);
        let h = problem.h.row(n);
        for (i, o) in out.row_mut(n).iter_mut().enumerate() {
            *o = h[i] * f[i];
        }
    }
    out
}

/// `R = bound_C/ε` in auto mode, the configured `R` otherwise.
pub fn resolve_r(reg: &RegularizationParams, epsilon: f64, bound_c: f64) -> f64 {
    match reg.truncation {
        TruncationMode::Explicit(r) => r,
        TruncationMode::Auto { .. } => bound_c / epsilon,
    }
}

/// `λ = max(1, 4K²)`.
pub fn lambda_from_amplification(k: f64) -> f64 {
    (4.0 * k * k).max(1.0)
}

/// Result of the probe-based amplification measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaEstimate {
    pub lambda: f64,
    pub amplification: f64,
}

/// Two smooth probe forcings: one riding on the load path, one fixed at
/// the grid centre and growing linearly in time.
pub fn default_probes(problem: &DiscreteProblem) -> [SpaceTimeField; 2] {
    let grid = problem.grid;
    let len = grid.x_max - grid.x_min;
    let width = (len / 16.0).max(4.0 * problem.epsilon());
    let centre = 0.5 * (grid.x_min + grid.x_max);
    let t_final = problem.axis.t_final;
    let mut moving = SpaceTimeField::zeros(grid, problem.axis);
    for n in 0..problem.axis.levels() {
        let z = problem.path[n].zeta;
        for (i, v) in moving.row_mut(n).iter_mut().enumerate() {
            *v = bump((grid.x(i) - z) / width);
        }
    }
    let fixed = SpaceTimeField::from_fn(grid, problem.axis, |t, x| bump((x - centre) / width) * t / t_final);
    [moving, fixed]
}

fn l2l2(field: &SpaceTimeField) -> f64 {
    *field.cumulative_l2l2().last().expect("axis has levels")
}

/// Measures the amplification of `B⁰∘C` about `base` along two probe
/// directions `δ_i = B⁰(g_i)` scaled to unit `‖δ‖_{L²L²} + ‖δ_t‖_{L²L²}`,
/// and returns `λ = max(1, 4K²)`.
pub fn lambda_auto(
    problem: &DiscreteProblem,
    base: &StateHistory,
    probes: [&SpaceTimeField; 2],
) -> Result<LambdaEstimate> {
    let solver = LinearSolver::new(SolverOptions::unmonitored());
    let zero = crate::model::Field::zeros(problem.grid);
    let c_base = apply_c(base, problem);
    let base_size = base.graph_norms().into_iter().fold(0.0, f64::max);
    let step = 1e-3 * (1.0 + base_size);
    let mut amp = 0.0f64;
    for g in probes {
        let mut delta = solver.solve(problem, g, &zero, &zero, problem.axis)?;
        let size = l2l2(&delta.u) + l2l2(&delta.ut);
        if size == 0.0 || !size.is_finite() {
            continue;
        }
        let scale = step / size;
        delta.u.values.iter_mut().for_each(|v| *v *= scale);
        delta.ut.values.iter_mut().for_each(|v| *v *= scale);
        let mut shifted = base.clone();
        for (a, b) in shifted.u.values.iter_mut().zip(&delta.u.values) {
            *a += b;
        }
        for (a, b) in shifted.ut.values.iter_mut().zip(&delta.ut.values) {
            *a += b;
        }
        let mut diff = apply_c(&shifted, problem);
        for (a, b) in diff.values.iter_mut().zip(&c_base.values) {
            *a -= b;
        }
        let response = solver.solve(problem, &diff, &zero, &zero, problem.axis)?;
        let k = response.graph_norms().into_iter().fold(0.0, f64::max) / step;
        amp = amp.max(k);
    }
    Ok(LambdaEstimate { lambda: lambda_from_amplification(amp), amplification: amp })
}

/// Iteration record and measured surrogates of the contraction argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport {
    pub iterates_used: usize,
    pub diffs: Vec<f64>,
    pub ratios: Vec<f64>,
    pub lambda: f64,
    pub ball_radius: f64,
    pub amplification: f64,
    pub linear_constant: f64,
    pub max_iterate_norm: f64,
    pub inside_ball: bool,
    pub fixed_point_residual: f64,
    pub truncation_radius: f64,
    pub max_slope_mollified: f64,
    pub truncation_inactive: bool,
}

/// Picard solve for a scenario; `R` from [`resolve_r`] with the configured cap.
pub fn picard_solve(
    scn: &Scenario,
    reg: &RegularizationParams,
    grid: Grid,
    axis: TimeAxis,
) -> Result<(StateHistory, PicardReport)> {
    reg.validate()?;
    let bound = match reg.truncation {
        TruncationMode::Auto { c_cap } => c_cap,
        TruncationMode::Explicit(r) => r * reg.epsilon,
    };
    let r = resolve_r(reg, reg.epsilon, bound);
    let problem = DiscreteProblem::new(scn, grid, axis, reg.epsilon, r)?;
    picard_solve_problem(&problem, reg, SolverOptions::standard(&grid))
}

fn stop_measure(metric: StopMetric, h: &StateHistory, other: Option<&StateHistory>, lambda: f64) -> f64 {
    let t = h.axis.t_final;
    match metric {
        StopMetric::WeightedGraph => {
            let series = match other {
                Some(o) => h.graph_norms_of_difference(o),
                None => h.graph_norms(),
            };
            weighted_sup(&series, &h.axis, lambda, t)
        }
        StopMetric::L2 => {
            let dx = h.grid.dx();
            let dt = h.axis.dt();
            let mut buf = vec![0.0; h.grid.nx];
            let sq: Vec<f64> = (0..h.axis.levels())
                .map(|n| {
                    for (i, b) in buf.iter_mut().enumerate() {
                        *b = h.u_row(n)[i] - other.map_or(0.0, |o| o.u_row(n)[i]);
                    }
                    l2_norm(&buf, dx).powi(2)
                })
                .collect();
            let acc: f64 = sq.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum();
            acc.sqrt()
        }
    }
}

/// Picard solve on an already sampled problem.
pub fn picard_solve_problem(
    problem: &DiscreteProblem,
    reg: &RegularizationParams,
    options: SolverOptions,
) -> Result<(StateHistory, PicardReport)> {
    let solver = LinearSolver::new(options);
    let axis = problem.axis;
    let source = source_term(problem);
    let mut v = solver.solve(problem, &source, &problem.u0_eps, &problem.u1_eps, axis)?;

    let [p1, p2] = default_probes(problem);
    let estimate = lambda_auto(problem, &v, [&p1, &p2])?;
    let lambda = match reg.lambda {
        LambdaMode::Explicit(l) => l,
        LambdaMode::Auto => estimate.lambda,
    };
    let linear_constant = estimate_ratio(&v, &problem.u0_eps, &problem.u1_eps, &source);
    let data = problem.u0_eps.h2_norm() + problem.u1_eps.l2_norm() + l2l2(&source);
    let ball_radius = 2.0 * estimate.amplification.max(linear_constant) * data;
    let graph = |h: &StateHistory| weighted_sup(&h.graph_norms(), &axis, lambda, axis.t_final);
    let mut max_iterate_norm = graph(&v);

    let mut diffs = Vec::new();
    let mut ratios = Vec::new();
    let mut rising = 0;
    let mut converged = false;
    for k in 0..reg.picard_max_iter {
        let g = apply_c(&v, problem);
        let next = solver.solve(problem, &g, &problem.u0_eps, &problem.u1_eps, axis)?;
        let d = stop_measure(reg.stop_metric, &next, Some(&v), lambda);
        let size = stop_measure(reg.stop_metric, &next, None, lambda);
        max_iterate_norm = max_iterate_norm.max(graph(&next));
        if let Some(&prev) = diffs.last() {
            let ratio = if prev > 0.0 { d / prev } else { 0.0 };
            ratios.push(ratio);
            rising = if ratio > 1.0 { rising + 1 } else { 0 };
        }
        diffs.push(d);
        v = next;
        if !d.is_finite() {
            return Err(Error::NonFinite { step: k });
        }
        if d < reg.picard_tol * (1.0 + size) {
            converged = true;
            break;
        }
        if rising >= 3 {
            return Err(Error::PicardDivergence { iteration: k + 1, diffs, ratios });
        }
    }
    if !converged {
        return Err(Error::PicardNonConvergence { iterations: reg.picard_max_iter, diffs, ratios });
    }

    let g = apply_c(&v, problem);
    let again = solver.solve(problem, &g, &problem.u0_eps, &problem.u1_eps, axis)?;
    let fixed_point_residual = again.graph_norms_of_difference(&v).into_iter().fold(0.0, f64::max);

    let max_slope_mollified = max_mollified_slope(&v, problem);
    let r = problem.truncation.r();
    let report = PicardReport {
        iterates_used: diffs.len(),
        diffs,
        ratios,
        lambda,
        ball_radius,
        amplification: estimate.amplification,
        linear_constant,
        max_iterate_norm,
        inside_ball: max_iterate_norm <= ball_radius,
        fixed_point_residual,
        truncation_radius: r,
        max_slope_mollified,
        truncation_inactive: max_slope_mollified <= r,
    };
    Ok((v, report))
}

/// `max_n ‖u(t_n) ⋆ θ^ε′‖_∞`.
pub fn max_mollified_slope(h: &StateHistory, problem: &DiscreteProblem) -> f64 {
    let mut w = vec![0.0; problem.grid.nx];
    let mut best = 0.0f64;
    for n in 0..h.axis.levels() {
        convolve_into(h.u_row(n), &problem.mollifier, Order::One, &mut w);
        best = w.iter().fold(best, |m, x| m.max(x.abs()));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_sup_examples() {
        let axis = TimeAxis::new(1.0, 4).unwrap();
        let s = [1.0, 3.0, 2.0, 5.0, 0.5];
        assert_eq!(weighted_sup(&s, &axis, 0.0, 1.0), 5.0);
        assert_eq!(weighted_sup(&s, &axis, 0.0, 0.5), 3.0);
        assert_eq!(weighted_sup(&[2.0; 5], &axis, 3.0, 1.0), 2.0);
        assert!(weighted_sup(&s, &axis, 2.0, 1.0) <= weighted_sup(&s, &axis, 1.0, 1.0));
    }

    #[test]
    fn lambda_clamp() {
        assert_eq!(lambda_from_amplification(2.0), 16.0);
        assert_eq!(lambda_from_amplification(0.0), 1.0);
    }

    #[test]
    fn resolve_r_modes() {
        let mut reg = RegularizationParams::new(0.1);
        reg.truncation = TruncationMode::Auto { c_cap: 3.0 };
        assert!((resolve_r(&reg, 0.1, 3.0) - 30.0).abs() < 1e-12);
        reg.truncation = TruncationMode::Explicit(5.0);
        assert_eq!(resolve_r(&reg, 0.1, 3.0), 5.0);
        assert_eq!(resolve_r(&reg, 0.02, 3.0), 5.0);
    }
}
