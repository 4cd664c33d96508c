use gaobeam::analysis::{
    default_battery, quadrature_weights, trace, trace_identity_gap, weak_residual_regularized,
    weak_residuals_regularized, Quadrature, TestFunction, TraceKind,
};
use gaobeam::fixed_point::picard_solve_problem;
use gaobeam::kernels::bump;
use gaobeam::linear_solver::{SolverOptions, StateHistory};
use gaobeam::model::{DiscreteProblem, Grid, RegularizationParams, Scenario, ScenarioSource, TimeAxis};

fn path_scenario() -> Scenario {
    Scenario::new(&ScenarioSource { zeta: "-0.5+t+0.5*t^2".into(), ..ScenarioSource::default() }).unwrap()
}

/// `u = bump((x − 0.2)/1.7)·cos(2t)` sampled with its exact time derivative.
fn smooth_history(nx: usize, nt: usize) -> StateHistory {
    let grid = Grid::new(-4.0, 4.0, nx).unwrap();
    let axis = TimeAxis::new(1.0, nt).unwrap();
    let mut h = StateHistory::zeros(grid, axis);
    for n in 0..axis.levels() {
        let t = axis.time(n);
        for i in 0..nx {
            let b = bump((grid.x(i) - 0.2) / 1.7);
            h.u.row_mut(n)[i] = b * (2.0 * t).cos();
            h.ut.row_mut(n)[i] = -2.0 * b * (2.0 * t).sin();
        }
    }
    h
}

#[test]
fn trace_identity_closes_under_refinement() {
    let scn = path_scenario();
    let battery: Vec<TestFunction> = default_battery(-0.5, 1.0);
    let gaps: Vec<Vec<f64>> = [(161, 50), (321, 100), (641, 200)]
        .iter()
        .map(|&(nx, nt)| {
            let h = smooth_history(nx, nt);
            battery.iter().map(|v| trace_identity_gap(&h, v, &scn).unwrap()).collect()
        })
        .collect();
    for m in 0..battery.len() {
        for w in gaps.windows(2) {
            let (a, b) = (w[0][m], w[1][m]);
            assert!(b <= 1e-13 || a / b >= 3.0, "member {m}: {a:e} -> {b:e}");
        }
    }
}

#[test]
fn traces_of_smooth_history() {
    let h = smooth_history(641, 100);
    let path: Vec<f64> = (0..h.axis.levels()).map(|n| 0.1 + 0.3 * h.axis.time(n)).collect();
    let tu = trace(&h, &path, TraceKind::U).unwrap();
    let tux = trace(&h, &path, TraceKind::Ux).unwrap();
    for n in 0..h.axis.levels() {
        let t = h.axis.time(n);
        let s = (path[n] - 0.2) / 1.7;
        let exact = bump(s) * (2.0 * t).cos();
        let q = 1.0 - s * s;
        let slope = bump(s) * (-2.0 * s / (q * q)) / 1.7 * (2.0 * t).cos();
        assert!((tu[n] - exact).abs() < 1e-7);
        assert!((tux[n] - slope).abs() < 1e-5);
    }
    assert!(trace(&h, &[10.0; 101], TraceKind::U).is_err());
}

#[test]
fn batch_and_single_residuals_agree() {
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
    let p = DiscreteProblem::new(&scn, grid, axis, 0.2, 15.0).unwrap();
    let reg = RegularizationParams::new(0.2);
    let (h, _) = picard_solve_problem(&p, &reg, SolverOptions::standard(&grid)).unwrap();
    let battery = default_battery(-0.5, 0.5);
    let trap = weak_residuals_regularized(&h, &battery, &p, Quadrature::Trapezoid).unwrap();
    for (m, a) in trap.iter().enumerate() {
        let single = weak_residual_regularized(&h, &battery[m], &p, Quadrature::Trapezoid).unwrap();
        assert_eq!(single, *a);
    }
}

#[test]
fn quadrature_rules_integrate_polynomials_exactly() {
    for n in [2usize, 5, 6, 11, 40] {
        let h = 0.7 / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let integrate = |rule, f: &dyn Fn(f64) -> f64| -> f64 {
            quadrature_weights(n, h, rule).iter().zip(&xs).map(|(w, &x)| w * f(x)).sum()
        };
        let linear = |x: f64| 2.0 - 3.0 * x;
        let exact_linear = 2.0 * 0.7 - 1.5 * 0.49;
        assert!((integrate(Quadrature::Trapezoid, &linear) - exact_linear).abs() < 1e-13);
        assert!((integrate(Quadrature::Simpson, &linear) - exact_linear).abs() < 1e-13);
        if (n - 1) % 2 == 0 {
            let cubic = |x: f64| x * x * x - x * x;
            let exact = 0.7f64.powi(4) / 4.0 - 0.7f64.powi(3) / 3.0;
            assert!((integrate(Quadrature::Simpson, &cubic) - exact).abs() < 1e-13, "n {n}");
        }
    }
    let rough: f64 = quadrature_weights(201, 0.01, Quadrature::Simpson)
        .iter()
        .enumerate()
        .map(|(i, w)| w * (i as f64 * 0.01).sin())
        .sum();
    assert!((rough - (1.0 - 2f64.cos())).abs() < 1e-9);
}
