//! Test functions and weak-form residuals of the regularized and limit
//! problems, plus the moving-mass integration-by-parts identities.

use super::norms::{trace, TraceKind};
use crate::error::{Error, Result};
use crate::kernels::{bump, bump_d1, bump_d2, convolve_into, Order};
use crate::linear_solver::StateHistory;
use crate::model::{first_difference, l2_norm, second_difference, DiscreteProblem, Grid, Scenario, TimeAxis};
use serde::Serialize;

/// Separable test function `v(t, x) = χ(t) w(x)` with
/// `χ(t) = (1 − t/T)² (1 − S((t/T − 0.6)/0.3))`, `S` a `C^∞` step, and `w(x) = bump((x − center)/width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub center: f64,
    pub width: f64,
    pub t_final: f64,
}

const CUT_START: f64 = 0.6;

/// `C^∞` step `1/(1 + exp(1/y − 1/(1−y)))` on `(0, 1)` with its first two
/// derivatives; exactly 0 below and 1 above.
fn smooth_step(y: f64) -> [f64; 3] {
    if y <= 1e-3 {
        return [0.0, 0.0, 0.0];
    }
    if y >= 1.0 - 1e-3 {
        return [1.0, 0.0, 0.0];
    }
    let z = 1.0 / (1.0 - y) - 1.0 / y;
    let l = 1.0 / (1.0 + (-z).exp());
    let z1 = 1.0 / (y * y) + 1.0 / ((1.0 - y) * (1.0 - y));
    let z2 = 2.0 / (1.0 - y).powi(3) - 2.0 / (y * y * y);
    let l1 = l * (1.0 - l);
    let l2 = l1 * (1.0 - 2.0 * l);
    [l, l1 * z1, l2 * z1 * z1 + l1 * z2]
}
const CUT_LEN: f64 = 0.3;

impl TestFunction {
    /// `(χ, χ̇, χ̈)` at `t`.
    pub fn chi(&self, t: f64) -> [f64; 3] {
        let tf = self.t_final;
        let r = t / tf;
        let (p, p1, p2) = ((1.0 - r).powi(2), -2.0 * (1.0 - r), 2.0);
        let [s, s1, s2] = smooth_step((r - CUT_START) / CUT_LEN);
        let (c, c1, c2) = (1.0 - s, -s1 / CUT_LEN, -s2 / (CUT_LEN * CUT_LEN));
        [p * c, (p1 * c + p * c1) / tf, (p2 * c + 2.0 * p1 * c1 + p * c2) / (tf * tf)]
    }

    /// `(w, w′, w″)` at `x`.
    pub fn w(&self, x: f64) -> [f64; 3] {
        let a = self.width;
        let s = (x - self.center) / a;
        [bump(s), bump_d1(s) / a, bump_d2(s) / (a * a)]
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    fn check(&self, grid: &Grid, pad: f64) -> Result<()> {
        let (lo, hi) = self.support();
        if lo - pad <= grid.x_min || hi + pad >= grid.x_max {
            return Err(Error::SupportViolation(format!(
                "test function support [{lo}, {hi}] plus {pad} not inside the grid"
            )));
        }
        Ok(())
    }
}

/// Twelve members: centers `ζ(0) + {−4, −2, −0.5, 0.5, 2, 4}`, widths
/// `{0.75, 1.5}`.
pub fn default_battery(zeta0: f64, t_final: f64) -> Vec<TestFunction> {
    let mut out = Vec::with_capacity(12);
    for width in [0.75, 1.5] {
        for off in [-4.0, -2.0, -0.5, 0.5, 2.0, 4.0] {
            out.push(TestFunction { center: zeta0 + off, width, t_final });
        }
    }
    out
}

/// Quadrature rule used for the space and time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quadrature {
    Trapezoid,
    /// Composite Simpson; an odd interval count closes with one trapezoid panel.
    Simpson,
}

/// Weights of `rule` for `n` samples with spacing `h`.
pub fn quadrature_weights(n: usize, h: f64, rule: Quadrature) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    match rule {
        Quadrature::Trapezoid => {
            w.iter_mut().for_each(|v| *v = h);
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
        }
        Quadrature::Simpson => {
            let intervals = n - 1;
            let even = intervals - intervals % 2;
            for k in (0..even).step_by(2) {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
            }
            if even < intervals {
                w[n - 2] += 0.5 * h;
                w[n - 1] += 0.5 * h;
            }
        }
    }
    w
}

/// Grid samples of `w`, `w′`, `w ⋆ θ`, `w′ ⋆ θ` for one test function, and
/// the three-point second difference of `w`, which pairs with the solver's
/// bending stencil by exact summation by parts.
struct Profile {
    w: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    wc: Vec<f64>,
    w1c: Vec<f64>,
    lo: usize,
    hi: usize,
}

impl Profile {
    fn new(v: &TestFunction, problem: &DiscreteProblem) -> Self {
        let grid = &problem.grid;
        let nx = grid.nx;
        let mut w = vec![0.0; nx];
        let mut w1 = vec![0.0; nx];
        let mut w2 = vec![0.0; nx];
        for i in 0..nx {
            [w[i], w1[i], _] = v.w(grid.x(i));
        }
        second_difference(&w, grid.dx(), &mut w2);
        let mut wc = vec![0.0; nx];
        let mut w1c = vec![0.0; nx];
        convolve_into(&w, &problem.mollifier, Order::Zero, &mut wc);
        convolve_into(&w1, &problem.mollifier, Order::Zero, &mut w1c);
        let pad = problem.epsilon() + 2.0 * grid.dx();
        let (a, b) = v.support();
        let lo = grid.floor_index(a - pad);
        let hi = (grid.floor_index(b + pad) + 1).min(nx - 1);
        Self { w, w1, w2, wc, w1c, lo, hi }
    }
}

/// Per-level fields shared by every test function.
struct LevelRows {
    d1: Vec<f64>,
    d2: Vec<f64>,
    mw: Vec<f64>,
    f: Vec<f64>,
    px: Vec<f64>,
}

impl LevelRows {
    fn new(nx: usize) -> Self {
        let z = || vec![0.0; nx];
        Self { d1: z(), d2: z(), mw: z(), f: z(), px: z() }
    }
}

/// Residuals of the regularized weak form for every member of `battery`:
///
/// ```text
/// ∫∫ [ −(1+Θ)u_t v_t + u_xx v_xx + ⅓w³(v_x⋆θ) − νp w (v_x⋆θ) − (νp)_x w (v⋆θ)
///      + f v + ΘP v ] − ∫ (1+Θ(0)) u₁^ε v(0),   w = u ⋆ θ′,  Θ = θ^ε(x − ζ(t)).
/// ```
///
/// The `Θ` terms are dropped when the mass term is disabled. Returns the
/// absolute totals.
pub fn weak_residuals_regularized(
    h: &StateHistory,
    battery: &[TestFunction],
    problem: &DiscreteProblem,
    rule: Quadrature,
) -> Result<Vec<f64>> {
    let grid = h.grid;
    let pad = problem.epsilon() + 2.0 * grid.dx();
    for v in battery {
        v.check(&grid, pad)?;
    }
    let nx = grid.nx;
    let dx = grid.dx();
    let wx = quadrature_weights(nx, dx, rule);
    let wt = quadrature_weights(h.axis.levels(), h.axis.dt(), rule);
    let profiles: Vec<Profile> = battery.iter().map(|v| Profile::new(v, problem)).collect();
    let mass = problem.scenario.mass_term_enabled;
    let mut rows = LevelRows::new(nx);
    let mut totals = vec![0.0; battery.len()];

    let ut0 = h.ut_row(0);
    let k0 = &problem.load_kernels[0];
    for ((v, p), tot) in battery.iter().zip(&profiles).zip(totals.iter_mut()) {
        let chi0 = v.chi(0.0)[0];
        let mut s = 0.0;
        for i in p.lo..=p.hi {
            let th = if mass { k0.value_at(i) } else { 0.0 };
            s += wx[i] * (1.0 + th) * ut0[i] * p.w[i];
        }
        *tot -= chi0 * s;
    }

    for n in 0..h.axis.levels() {
        let t = h.axis.time(n);
        let (u, ut) = (h.u_row(n), h.ut_row(n));
        second_difference(u, dx, &mut rows.d2);
        convolve_into(u, &problem.mollifier, Order::One, &mut rows.mw);
        problem.distributed_row(n, &mut rows.f);
        let nu_p = problem.nu_p.as_ref().map(|f| f.row(n));
        if nu_p.is_some() {
            problem.nu_p_x_row(n, &mut rows.px);
        }
        let kernel = &problem.load_kernels[n];
        let load = problem.path[n].load;
        for ((v, p), tot) in battery.iter().zip(&profiles).zip(totals.iter_mut()) {
            let [c, c1, _] = v.chi(t);
            if c == 0.0 && c1 == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for i in p.lo..=p.hi {
                let th = if mass { kernel.value_at(i) } else { 0.0 };
                let w = rows.mw[i];
                let (np, npx) = nu_p.map_or((0.0, 0.0), |r| (r[i], rows.px[i]));
                let e = -(1.0 + th) * ut[i] * c1 * p.w[i]
                    + c * (rows.d2[i] * p.w2[i] + (w * w * w / 3.0 - np * w) * p.w1c[i] - npx * w * p.wc[i]
                        + (rows.f[i] + kernel.value_at(i) * load) * p.w[i]);
                s += wx[i] * e;
            }
            *tot += wt[n] * s;
        }
    }
    Ok(totals.into_iter().map(f64::abs).collect())
}

/// Single-function form of [`weak_residuals_regularized`].
pub fn weak_residual_regularized(
    h: &StateHistory,
    v: &TestFunction,
    problem: &DiscreteProblem,
    rule: Quadrature,
) -> Result<f64> {
    Ok(weak_residuals_regularized(h, std::slice::from_ref(v), problem, rule)?[0])
}

/// Path samples `(ζ, ζ̇)` at every level.
fn path_samples(scn: &Scenario, axis: &TimeAxis) -> (Vec<f64>, Vec<f64>) {
    (0..axis.levels())
        .map(|n| {
            let t = axis.time(n);
            (scn.zeta.eval(t, 0.0), scn.zeta_dot.eval(t, 0.0))
        })
        .unzip()
}

/// Residuals of the limit weak form for every member of `battery`:
///
/// ```text
/// ∫∫ [ −u_t v_t + u_xx v_xx + ⅓u_x³ v_x + νp u_xx v + f v ] + ∫ P v(t, ζ)
///   + ∫ [ u v_tt + ζ̇ u_x v_t + ζ̇ u v_xt ](t, ζ(t)) dt + u₀(ζ₀) v_t(0, ζ₀)
///   − ∫ u₁ v(0) − u₁(ζ₀) v(0, ζ₀)
/// ```
///
/// with traces of the computed history and the unmollified data `u₀`, `u₁`.
/// Trace terms are dropped when the mass term is disabled.
pub fn weak_residuals_limit(h: &StateHistory, battery: &[TestFunction], problem: &DiscreteProblem) -> Result<Vec<f64>> {
    let grid = h.grid;
    for v in battery {
        v.check(&grid, 2.0 * grid.dx())?;
    }
    let nx = grid.nx;
    let dx = grid.dx();
    let wx = quadrature_weights(nx, dx, Quadrature::Trapezoid);
    let wt = quadrature_weights(h.axis.levels(), h.axis.dt(), Quadrature::Trapezoid);
    let scn = &problem.scenario;
    let mass = scn.mass_term_enabled;
    let (zeta, zeta_dot) = path_samples(scn, &h.axis);
    let tu = trace(h, &zeta, TraceKind::U)?;
    let tux = trace(h, &zeta, TraceKind::Ux)?;
    let profiles: Vec<Profile> = battery.iter().map(|v| Profile::new(v, problem)).collect();
    let mut rows = LevelRows::new(nx);
    let mut totals = vec![0.0; battery.len()];

    let z0 = zeta[0];
    let u0z = scn.u0.eval(0.0, z0);
    let u1z = scn.u1.eval(0.0, z0);
    for ((v, p), tot) in battery.iter().zip(&profiles).zip(totals.iter_mut()) {
        let [c, c1, _] = v.chi(0.0);
        let wz = v.w(z0)[0];
        let s: f64 = (p.lo..=p.hi).map(|i| wx[i] * problem.u1.values[i] * p.w[i]).sum();
        *tot -= c * s;
        if mass {
            *tot += u0z * c1 * wz - u1z * c * wz;
        }
    }

    for n in 0..h.axis.levels() {
        let t = h.axis.time(n);
        let (u, ut) = (h.u_row(n), h.ut_row(n));
        first_difference(u, dx, &mut rows.d1);
        second_difference(u, dx, &mut rows.d2);
        problem.distributed_row(n, &mut rows.f);
        let nu_p = problem.nu_p.as_ref().map(|f| f.row(n));
        let load = problem.path[n].load;
        for ((v, p), tot) in battery.iter().zip(&profiles).zip(totals.iter_mut()) {
            let [c, c1, c2] = v.chi(t);
            if c == 0.0 && c1 == 0.0 && c2 == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for i in p.lo..=p.hi {
                let np = nu_p.map_or(0.0, |r| r[i]);
                let ux = rows.d1[i];
                let e = -ut[i] * c1 * p.w[i]
                    + c * (rows.d2[i] * p.w2[i]
                        + ux * ux * ux / 3.0 * p.w1[i]
                        + np * rows.d2[i] * p.w[i]
                        + rows.f[i] * p.w[i]);
                s += wx[i] * e;
            }
            let [wz, wz1, _] = v.w(zeta[n]);
            s += load * c * wz;
            if mass {
                s += tu[n] * c2 * wz + zeta_dot[n] * (tux[n] * c1 * wz + tu[n] * c1 * wz1);
            }
            *tot += wt[n] * s;
        }
    }
    Ok(totals.into_iter().map(f64::abs).collect())
}

/// Single-function form of [`weak_residuals_limit`].
pub fn weak_residual_limit(h: &StateHistory, v: &TestFunction, problem: &DiscreteProblem) -> Result<f64> {
    Ok(weak_residuals_limit(h, std::slice::from_ref(v), problem)?[0])
}

/// Five-point fourth-order `u_x`; zero at the two outer points per side.
fn slope_4(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 2..n - 2 {
        out[i] = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) / (12.0 * dx);
    }
}

/// `|L − R|` of the moving-mass identity
///
/// ```text
/// L = ∫∫ Θ u_t v_t,
/// R = −∫ Θ(0) u(0) v_t(0) − ∫∫ Θ u v_tt − ∫∫ ζ̇ Θ u_x v_t − ∫∫ ζ̇ Θ u v_xt,
/// ```
///
/// `Θ = θ^ε(x − ζ(t))`, for every member of `battery`. `u_x` is the
/// five-point fourth-order difference.
pub fn dirac_ibp_identities(h: &StateHistory, battery: &[TestFunction], problem: &DiscreteProblem) -> Result<Vec<f64>> {
    let grid = h.grid;
    let pad = problem.epsilon() + 2.0 * grid.dx();
    for v in battery {
        v.check(&grid, pad)?;
    }
    let dx = grid.dx();
    let wt = quadrature_weights(h.axis.levels(), h.axis.dt(), Quadrature::Trapezoid);
    let profiles: Vec<Profile> = battery.iter().map(|v| Profile::new(v, problem)).collect();
    let mut d1 = vec![0.0; grid.nx];
    let mut gaps = vec![0.0; battery.len()];
    for n in 0..h.axis.levels() {
        let t = h.axis.time(n);
        let (u, ut) = (h.u_row(n), h.ut_row(n));
        slope_4(u, dx, &mut d1);
        let k = &problem.load_kernels[n];
        let zd = problem.path[n].zeta_dot;
        for ((v, p), gap) in battery.iter().zip(&profiles).zip(gaps.iter_mut()) {
            let [_, c1, c2] = v.chi(t);
            let (mut l, mut r) = (0.0, 0.0);
            for (j, &th) in k.value.iter().enumerate() {
                let i = k.start + j;
                l += th * ut[i] * c1 * p.w[i];
                r -= th * (u[i] * c2 * p.w[i] + zd * (d1[i] * c1 * p.w[i] + u[i] * c1 * p.w1[i]));
                if n == 0 {
                    *gap += th * u[i] * c1 * p.w[i] * dx;
                }
            }
            *gap += wt[n] * dx * (l - r);
        }
    }
    Ok(gaps.into_iter().map(f64::abs).collect())
}

/// Single-function form of [`dirac_ibp_identities`].
pub fn dirac_ibp_identity(h: &StateHistory, v: &TestFunction, problem: &DiscreteProblem) -> Result<f64> {
    Ok(dirac_ibp_identities(h, std::slice::from_ref(v), problem)?[0])
}

/// `|∫ u_t v_t (t, ζ) dt + u(0, ζ₀) v_t(0, ζ₀) + ∫ [u v_tt + ζ̇ u_x v_t + ζ̇ u v_xt](t, ζ) dt|`,
/// the trace form of the moving-mass identity, with traces by cubic
/// interpolation. Meaningful only for smooth histories.
pub fn trace_identity_gap(h: &StateHistory, v: &TestFunction, scn: &Scenario) -> Result<f64> {
    let (zeta, zeta_dot) = path_samples(scn, &h.axis);
    let tu = trace(h, &zeta, TraceKind::U)?;
    let tut = trace(h, &zeta, TraceKind::Ut)?;
    let tux = trace(h, &zeta, TraceKind::Ux)?;
    let wt = quadrature_weights(h.axis.levels(), h.axis.dt(), Quadrature::Trapezoid);
    let mut gap = tu[0] * v.chi(0.0)[1] * v.w(zeta[0])[0];
    for n in 0..h.axis.levels() {
        let [_, c1, c2] = v.chi(h.axis.time(n));
        let [w, w1, _] = v.w(zeta[n]);
        gap += wt[n] * (tut[n] * c1 * w + tu[n] * c2 * w + zeta_dot[n] * (tux[n] * c1 * w + tu[n] * c1 * w1));
    }
    Ok(gap.abs())
}

/// `‖u(0) − u₀‖_{L²}`.
pub fn initial_datum_check(h: &StateHistory, scn: &Scenario) -> f64 {
    let grid = h.grid;
    let diff: Vec<f64> = h.u_row(0).iter().enumerate().map(|(i, v)| v - scn.u0.eval(0.0, grid.x(i))).collect();
    l2_norm(&diff, grid.dx())
}
