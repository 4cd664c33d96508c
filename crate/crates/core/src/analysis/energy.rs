//! Energy bookkeeping along the `τ`-multiplier `u_t + ζ̇ u_x`.

use crate::fixed_point::bracket_row;
use crate::kernels::{convolve_into, Order};
use crate::linear_solver::{apply_d4, Boundary, StateHistory};
use crate::model::{first_difference, second_difference, trapezoid, trapezoid_dot, DiscreteProblem};
use serde::Serialize;

/// Per-level energy entries of a computed history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    /// `½‖u_t‖²`.
    pub kinetic: Vec<f64>,
    /// `½‖u_xx‖²`.
    pub bending: Vec<f64>,
    /// `∫ μ^R(u ⋆ θ′) dx`.
    pub nonlinear_mu: Vec<f64>,
    /// `½∫ θ^ε(x − ζ) u_t² dx`.
    pub concentrated: Vec<f64>,
    /// `∫₀ᵗ∫ (A₁ + … + A₅)(u_t + ζ̇ u_x) dx ds`.
    pub tau_residual: Vec<f64>,
    /// `‖u‖_{H²} + ‖u_t‖`.
    pub state_norm: Vec<f64>,
}

impl EnergyLedger {
    pub fn max_abs_tau_residual(&self) -> f64 {
        self.tau_residual.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_state_norm(&self) -> f64 {
        self.state_norm.iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// Discrete residual of `(1+Θ)u_tt − ζ̇Θ′u_t + u_xxxx − N⋆θ − h` at level
/// `n` with `u_tt` from the centered second difference in time.
fn residual_density(h: &StateHistory, problem: &DiscreteProblem, n: usize, buf: &mut Buffers) -> f64 {
    let nx = h.grid.nx;
    let dx = h.grid.dx();
    let dt = h.axis.dt();
    let (um, u, up) = (h.u_row(n - 1), h.u_row(n), h.u_row(n + 1));
    let v = h.ut_row(n);
    apply_d4(u, dx, Boundary::Hinged, &mut buf.d4);
    bracket_row(problem, u, n, &mut buf.w1, &mut buf.w2, &mut buf.q, &mut buf.nl);
    first_difference(u, dx, &mut buf.d1);
    let hrow = problem.h.row(n);
    let zd = problem.path[n].zeta_dot;
    let kernel = &problem.load_kernels[n];
    let mass = problem.scenario.mass_term_enabled;
    for i in 0..nx {
        let utt = (up[i] - 2.0 * u[i] + um[i]) / (dt * dt);
        let inertia = if mass { kernel.value_at(i) * utt - zd * kernel.slope_at(i) * v[i] } else { 0.0 };
        buf.res[i] = utt + inertia + buf.d4[i] - buf.nl[i] - hrow[i];
        buf.tau[i] = v[i] + zd * buf.d1[i];
    }
    trapezoid_dot(&buf.res, &buf.tau, dx)
}

struct Buffers {
    d1: Vec<f64>,
    d4: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    q: Vec<f64>,
    nl: Vec<f64>,
    res: Vec<f64>,
    tau: Vec<f64>,
}

impl Buffers {
    fn new(nx: usize) -> Self {
        let z = || vec![0.0; nx];
        Self { d1: z(), d4: z(), w1: z(), w2: z(), q: z(), nl: z(), res: z(), tau: z() }
    }
}

/// Energy entries at every level. The `τ`-residual is accumulated by the
/// trapezoid rule over the interior levels `1..nt` and held constant at
/// the two end levels.
pub fn energy_ledger(h: &StateHistory, problem: &DiscreteProblem) -> EnergyLedger {
    let nx = h.grid.nx;
    let dx = h.grid.dx();
    let levels = h.axis.levels();
    let trunc = &problem.truncation;
    let mut buf = Buffers::new(nx);
    let mut led = EnergyLedger {
        times: (0..levels).map(|n| h.axis.time(n)).collect(),
        kinetic: Vec::with_capacity(levels),
        bending: Vec::with_capacity(levels),
        nonlinear_mu: Vec::with_capacity(levels),
        concentrated: Vec::with_capacity(levels),
        tau_residual: vec![0.0; levels],
        state_norm: h.graph_norms(),
    };
    for n in 0..levels {
        let (u, v) = (h.u_row(n), h.ut_row(n));
        led.kinetic.push(0.5 * trapezoid_dot(v, v, dx));
        second_difference(u, dx, &mut buf.d1);
        led.bending.push(0.5 * trapezoid_dot(&buf.d1, &buf.d1, dx));
        convolve_into(u, &problem.mollifier, Order::One, &mut buf.w1);
        for (q, &w) in buf.q.iter_mut().zip(&buf.w1) {
            *q = trunc.mu(w);
        }
        led.nonlinear_mu.push(trapezoid(&buf.q, dx));
        let k = &problem.load_kernels[n];
        let c: f64 = k.value.iter().enumerate().map(|(j, th)| th * v[k.start + j].powi(2)).sum::<f64>();
        led.concentrated.push(0.5 * c * dx);
    }
    if levels >= 3 {
        let dt = h.axis.dt();
        let dens: Vec<f64> = (1..levels - 1).map(|n| residual_density(h, problem, n, &mut buf)).collect();
        let mut acc = 0.0;
        for k in 1..dens.len() {
            acc += 0.5 * dt * (dens[k - 1] + dens[k]);
            led.tau_residual[k + 1] = acc;
        }
        led.tau_residual[levels - 1] = acc;
    }
    led
}

/// `max / median` over the ladder of `sup_t (‖u‖_{H²} + ‖u_t‖)`.
pub fn uniform_bound_check(ledgers: &[EnergyLedger]) -> f64 {
    let sups: Vec<f64> = ledgers.iter().map(EnergyLedger::sup_state_norm).collect();
    uniform_ratio(&sups)
}

/// `max / median` of a list of positive numbers; 1 for an empty list.
pub fn uniform_ratio(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 { sorted[k / 2] } else { 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]) };
    let max = sorted[k - 1];
    if median == 0.0 {
        if max == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        max / median
    }
}
