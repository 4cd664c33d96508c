use gaobeam::fixed_point::{apply_c, lambda_from_amplification, picard_solve, picard_solve_problem, weighted_sup};
use gaobeam::kernels::Order;
use gaobeam::linear_solver::{SolverOptions, StateHistory};
use gaobeam::model::{
    DiscreteProblem, Grid, RegularizationParams, Scenario, ScenarioSource, SpaceTimeField, StopMetric, TimeAxis,
};
use proptest::prelude::*;

fn small_problem(r: f64) -> DiscreteProblem {
    let scn = Scenario::new(&ScenarioSource {
        zeta: "-0.3+t".into(),
        load: "1+t".into(),
        traction: "0.5*bump(x/1.5)".into(),
        distributed: "0.2*bump(x)".into(),
        u0: "0.3*bump(x)".into(),
        u1: "0".into(),
        nu: 1.3,
        mass_term_enabled: true,
    })
    .unwrap();
    let grid = Grid::new(-2.0, 2.0, 81).unwrap();
    let axis = TimeAxis::new(0.4, 6).unwrap();
    DiscreteProblem::new(&scn, grid, axis, 0.25, r).unwrap()
}

fn history(p: &DiscreteProblem, values: &[f64], amp: f64) -> StateHistory {
    let mut h = StateHistory::zeros(p.grid, p.axis);
    for (k, v) in h.u.values.iter_mut().enumerate() {
        *v = amp * values[k % values.len()];
    }
    for (k, v) in h.ut.values.iter_mut().enumerate() {
        *v = amp * values[(k * 7 + 3) % values.len()];
    }
    h
}

/// `C(v)` by full double sums over every grid pair, independent of the
/// library's convolution routine.
fn composition_oracle(p: &DiscreteProblem, v: &StateHistory, square: bool) -> Vec<f64> {
    let nx = p.grid.nx;
    let dx = p.grid.dx();
    let m = &p.mollifier;
    let k = m.half_width() as i64;
    let conv = |input: &[f64], order: Order| -> Vec<f64> {
        let s = m.samples(order);
        (0..nx)
            .map(|i| {
                (0..nx)
                    .filter(|&j| (i as i64 - j as i64).abs() <= k)
                    .map(|j| {
                        let w = if j == 0 || j == nx - 1 { 0.5 } else { 1.0 };
                        w * input[j] * s[(i as i64 - j as i64 + k) as usize] * dx
                    })
                    .sum()
            })
            .collect()
    };
    let mut out = Vec::new();
    for n in 0..p.axis.levels() {
        let u = v.u_row(n);
        let w1 = conv(u, Order::One);
        let w2 = conv(u, Order::Two);
        let np = p.nu_p.as_ref().map(|f| f.row(n).to_vec()).unwrap_or_else(|| vec![0.0; nx]);
        let q: Vec<f64> = (0..nx)
            .map(|i| {
                let phi = if square { w1[i] * w1[i] } else { p.truncation.phi(w1[i]) };
                (phi - np[i]) * w2[i]
            })
            .collect();
        let r = conv(&q, Order::Zero);
        let kern = &p.load_kernels[n];
        for i in 0..nx {
            let f = 1.0 / (1.0 + kern.value_at(i));
            out.push((r[i] + p.h.row(n)[i]) * f);
        }
    }
    out
}

const NOISE: [f64; 13] = [0.31, -0.72, 0.05, 0.88, -0.41, 0.27, -0.93, 0.64, -0.12, 0.49, -0.58, 0.81, -0.26];

#[test]
fn composition_matches_brute_force() {
    let p = small_problem(2.0);
    for amp in [0.01, 1.0, 20.0] {
        let v = history(&p, &NOISE, amp);
        let got = apply_c(&v, &p);
        let want = composition_oracle(&p, &v, false);
        let scale = want.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        for (a, b) in got.values.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12 * scale, "amp {amp}: {a} vs {b}");
        }
    }
}

#[test]
fn inactive_truncation_equals_square() {
    let p = small_problem(1e6);
    let v = history(&p, &NOISE, 0.5);
    let got = apply_c(&v, &p);
    let want = composition_oracle(&p, &v, true);
    let scale = want.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    for (a, b) in got.values.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-12 * scale);
    }
}

fn l2l2(values: &[f64], p: &DiscreteProblem) -> f64 {
    let f = SpaceTimeField { grid: p.grid, axis: p.axis, values: values.to_vec() };
    *f.cumulative_l2l2().last().unwrap()
}

/// `‖θ‖₁ · max(((R+1)² + ‖νp‖_∞) ‖θ″‖₁, L ‖θ′‖₂ ‖θ″‖₁)` from Young and
/// Cauchy–Schwarz on the sampled kernels; `L` is the Lipschitz constant of `φ^R`.
fn lipschitz_constant(p: &DiscreteProblem) -> f64 {
    let m = &p.mollifier;
    let dx = p.grid.dx();
    let l1 = |o: Order| m.samples(o).iter().map(|v| v.abs()).sum::<f64>() * dx;
    let l2 = |o: Order| (m.samples(o).iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
    let nu_p = p.nu_p.as_ref().map_or(0.0, |f| f.values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let t = &p.truncation;
    l1(Order::Zero) * ((t.bound() + nu_p) * l1(Order::Two)).max(t.lipschitz() * l2(Order::One) * l1(Order::Two))
}

fn lipschitz_ratio(p: &DiscreteProblem, v: &StateHistory, w: &StateHistory) -> f64 {
    let cv = apply_c(v, p);
    let cw = apply_c(w, p);
    let dc: Vec<f64> = cv.values.iter().zip(&cw.values).map(|(a, b)| a - b).collect();
    let du: Vec<f64> = v.u.values.iter().zip(&w.u.values).map(|(a, b)| a - b).collect();
    let dut: Vec<f64> = v.ut.values.iter().zip(&w.ut.values).map(|(a, b)| a - b).collect();
    let sup_w = w.l2_norms().into_iter().fold(0.0, f64::max);
    let d = l2l2(&du, p);
    l2l2(&dc, p) / (d + l2l2(&dut, p) + sup_w * d)
}

#[test]
fn lipschitz_constant_holds_on_calibration_pairs() {
    let p = small_problem(3.0);
    let k = lipschitz_constant(&p);
    assert!(k.is_finite() && k > 0.0);
    for (a, b) in [(0.1, 0.2), (1.0, 3.0), (10.0, 0.01), (50.0, 49.0)] {
        let v = history(&p, &NOISE, a);
        let mut shifted = NOISE;
        shifted.rotate_left(5);
        let w = history(&p, &shifted, b);
        assert!(lipschitz_ratio(&p, &v, &w) <= k);
    }
}

#[test]
fn zero_scenario_converges_immediately() {
    let grid = Grid::new(-8.0, 8.0, 321).unwrap();
    let axis = TimeAxis::new(0.5, 50).unwrap();
    let (h, rep) = picard_solve(&Scenario::zero(), &RegularizationParams::new(0.2), grid, axis).unwrap();
    assert!(rep.iterates_used <= 2);
    assert!(h.u.values.iter().chain(&h.ut.values).all(|&v| v == 0.0));
}

#[test]
fn amplification_example() {
    assert_eq!(lambda_from_amplification(2.0), 16.0);
    assert_eq!(lambda_from_amplification(0.1), 1.0);
}

fn smooth_problem() -> (DiscreteProblem, RegularizationParams) {
    let scn = Scenario::new(&ScenarioSource {
        zeta: "-0.5+t+0.5*t^2".into(),
        load: "0.5*exp(4)*bump(2*t-1)^4".into(),
        traction: "0.3*exp(4)*bump(x/6)^4".into(),
        distributed: "0".into(),
        u0: "0.05*exp(8)*bump(x/3)^8".into(),
        u1: "0".into(),
        nu: 1.3,
        mass_term_enabled: true,
    })
    .unwrap();
    let grid = Grid::new(-24.0, 24.0, 961).unwrap();
    let axis = TimeAxis::new(0.5, 250).unwrap();
    let reg = RegularizationParams::new(0.2);
    (DiscreteProblem::new(&scn, grid, axis, 0.2, 15.0).unwrap(), reg)
}

#[test]
fn smooth_run_contracts_and_is_reproducible() {
    let (p, reg) = smooth_problem();
    let opts = SolverOptions::standard(&p.grid);
    let (h1, r1) = picard_solve_problem(&p, &reg, opts).unwrap();
    let (h2, r2) = picard_solve_problem(&p, &reg, opts).unwrap();
    assert!(r1.ratios.iter().all(|&r| r < 1.0), "{:?}", r1.ratios);
    assert!(r1.fixed_point_residual <= 10.0 * reg.picard_tol);
    assert!(r1.truncation_inactive && r1.max_slope_mollified <= r1.truncation_radius);
    assert!(r1.inside_ball);
    assert_eq!(r1, r2);
    assert_eq!(h1.u.values, h2.u.values);
}

#[test]
fn l2_stop_metric_agrees() {
    let (p, mut reg) = smooth_problem();
    let opts = SolverOptions::standard(&p.grid);
    let (h1, _) = picard_solve_problem(&p, &reg, opts).unwrap();
    reg.stop_metric = StopMetric::L2;
    let (h2, r2) = picard_solve_problem(&p, &reg, opts).unwrap();
    assert!(r2.ratios.iter().all(|&r| r < 1.0));
    let d = h1.graph_norms_of_difference(&h2).into_iter().fold(0.0, f64::max);
    assert!(d < 1e-7, "{d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lipschitz_bound_never_exceeded(
        a in prop::collection::vec(-1.0f64..1.0, 5..40),
        b in prop::collection::vec(-1.0f64..1.0, 5..40),
        sa in 0.0f64..30.0,
        sb in 0.0f64..30.0,
    ) {
        let p = small_problem(3.0);
        let k = lipschitz_constant(&p);
        let v = history(&p, &a, sa);
        let w = history(&p, &b, sb);
        let ratio = lipschitz_ratio(&p, &v, &w);
        prop_assert!(ratio.is_nan() || ratio <= k, "{ratio} > {k}");
    }

    #[test]
    fn weighted_sup_monotone(series in prop::collection::vec(0.0f64..10.0, 3..30), l1 in 0.0f64..20.0, dl in 0.0f64..20.0) {
        let axis = TimeAxis::new(1.0, series.len() - 1).unwrap();
        let mut prev = 0.0;
        for n in 0..series.len() {
            let t = axis.time(n);
            let v = weighted_sup(&series, &axis, l1, t);
            prop_assert!(v >= prev);
            prop_assert!(weighted_sup(&series, &axis, l1 + dl, t) <= v);
            prev = v;
        }
    }
}
