use gaobeam::cli::verify::{manufactured_study, plane_wave_phase_error, ManufacturedCase, ManufacturedPlan};
use gaobeam::error::Error;
use gaobeam::fixed_point::source_term;
use gaobeam::linear_solver::{
    estimate_ratio, solve_linear, CoefficientHistory, LinearSolver, Reassembly, SolverOptions, StateHistory,
    UnitCoefficients, ZeroForcing,
};
use gaobeam::model::{
    l2_norm, second_difference, DiscreteProblem, Field, Grid, Scenario, ScenarioSource, SpaceTimeField, TimeAxis,
};
use proptest::prelude::*;

fn demo_scenario() -> Scenario {
    Scenario::new(&ScenarioSource {
        zeta: "-0.5+t+0.5*t^2".into(),
        load: "0.5*exp(4)*bump(2*t-1)^4".into(),
        traction: "0.3*exp(4)*bump(x/6)^4".into(),
        distributed: "0".into(),
        u0: "0.05*exp(8)*bump(x/3)^8".into(),
        u1: "0".into(),
        nu: 1.3,
        mass_term_enabled: true,
    })
    .unwrap()
}

#[test]
fn manufactured_orders_unit_coefficients() {
    let r = manufactured_study(&ManufacturedCase::UNIT, &ManufacturedPlan::unit()).unwrap();
    assert!(r.space_orders.iter().chain(&r.time_orders).all(|&o| o >= 1.9), "{r:?}");
}

#[test]
fn manufactured_orders_variable_coefficients() {
    let r = manufactured_study(&ManufacturedCase::VARIABLE, &ManufacturedPlan::variable()).unwrap();
    assert!(r.space_orders.iter().chain(&r.time_orders).all(|&o| o >= 1.9), "{r:?}");
}

#[test]
fn plane_wave_dispersion() {
    for k in 1..=4 {
        let e = plane_wave_phase_error(k, 256, 1000).unwrap();
        assert!(e < 0.01, "k {k}: {e}");
    }
}

#[test]
fn periodic_energy_is_conserved() {
    let grid = Grid::new(0.0, 2.0 * std::f64::consts::PI, 129).unwrap();
    let axis = TimeAxis::new(2.0, 400).unwrap();
    let u0 = Field::from_fn(grid, |x| x.sin() + 0.3 * (3.0 * x).cos());
    let u1 = Field::from_fn(grid, |x| 0.5 * (2.0 * x).sin());
    let h =
        LinearSolver::new(SolverOptions::periodic()).solve(&UnitCoefficients, &ZeroForcing, &u0, &u1, axis).unwrap();
    let m = grid.nx - 1;
    let dx = grid.dx();
    let energy = |n: usize| {
        let u = &h.u_row(n)[..m];
        let v = &h.ut_row(n)[..m];
        let d2: f64 =
            (0..m).map(|i| (u[(i + 1) % m] - 2.0 * u[i] + u[(i + m - 1) % m]).powi(2)).sum::<f64>() / dx.powi(4);
        0.5 * (v.iter().map(|x| x * x).sum::<f64>() + d2) * dx
    };
    let e0 = energy(0);
    for n in 1..axis.levels() {
        assert!((energy(n) - e0).abs() < 1e-10 * e0, "step {n}");
    }
}

#[test]
fn estimate_ratio_stable_under_refinement() {
    let scn = demo_scenario();
    let ratios: Vec<f64> = [1usize, 2, 4]
        .iter()
        .map(|&k| {
            let grid = Grid::new(-24.0, 24.0, 960 * k + 1).unwrap();
            let axis = TimeAxis::new(0.5, 125 * k).unwrap();
            let p = DiscreteProblem::new(&scn, grid, axis, 0.2, 15.0).unwrap();
            let g = source_term(&p);
            let h = solve_linear(&p, &g, &p.u0_eps, &p.u1_eps, axis).unwrap();
            estimate_ratio(&h, &p.u0_eps, &p.u1_eps, &g)
        })
        .collect();
    for r in &ratios[1..] {
        assert!((r / ratios[0] - 1.0).abs() < 0.1, "{ratios:?}");
    }
}

#[test]
fn cadence_reassembly_tracks_per_step() {
    let scn = demo_scenario();
    let grid = Grid::new(-24.0, 24.0, 1921).unwrap();
    let axis = TimeAxis::new(0.5, 250).unwrap();
    let p = DiscreteProblem::new(&scn, grid, axis, 0.2, 15.0).unwrap();
    let g = source_term(&p);
    let every = solve_linear(&p, &g, &p.u0_eps, &p.u1_eps, axis).unwrap();
    let mut opts = SolverOptions::standard(&grid);
    opts.reassembly = Reassembly::Cadence;
    let cadence = LinearSolver::new(opts).solve(&p, &g, &p.u0_eps, &p.u1_eps, axis).unwrap();
    let diff = every.graph_norms_of_difference(&cadence).into_iter().fold(0.0, f64::max);
    let size = every.graph_norms().into_iter().fold(0.0, f64::max);
    assert!(diff < 0.05 * size, "{diff} vs {size}");
}

#[test]
fn quiescence_monitor_rejects_small_domain() {
    let grid = Grid::new(-3.0, 3.0, 241).unwrap();
    let axis = TimeAxis::new(0.5, 100).unwrap();
    let u0 = Field::from_fn(grid, |x| if x.abs() < 1.0 { (-1.0 / (1.0 - x * x)).exp() } else { 0.0 });
    let err = solve_linear(&UnitCoefficients, &ZeroForcing, &u0, &Field::zeros(grid), axis).unwrap_err();
    assert!(matches!(err, Error::Quiescence { .. }), "{err}");
}

#[test]
fn hinged_solution_keeps_boundary_values() {
    let grid = Grid::new(-1.0, 1.0, 101).unwrap();
    let axis = TimeAxis::new(0.2, 20).unwrap();
    let u0 = Field::from_fn(grid, |x| (std::f64::consts::PI * (x + 1.0) / 2.0).sin() * (1.0 - x * x));
    let h = LinearSolver::new(SolverOptions::unmonitored())
        .solve(&UnitCoefficients, &ZeroForcing, &u0, &Field::zeros(grid), axis)
        .unwrap();
    let mut d2 = vec![0.0; grid.nx];
    for n in 0..axis.levels() {
        let u = h.u_row(n);
        assert_eq!((u[0], u[grid.nx - 1]), (0.0, 0.0));
        second_difference(u, grid.dx(), &mut d2);
        assert!(l2_norm(&d2, grid.dx()).is_finite());
    }
}

fn random_instance(seed: &[f64], grid: Grid, axis: TimeAxis, phase: f64) -> (CoefficientHistory, SpaceTimeField) {
    let pick = |k: usize| seed[k % seed.len()];
    let f = SpaceTimeField::from_fn(grid, axis, |t, x| 0.6 + 0.3 * (pick(0) * x + t).sin().powi(2));
    let g = SpaceTimeField::from_fn(grid, axis, |t, x| pick(1) * (x - t).cos());
    let forcing = SpaceTimeField::from_fn(grid, axis, |t, x| pick(2) * (phase * x + pick(3) * t).sin());
    (CoefficientHistory { f, g }, forcing)
}

fn solve_with(
    coeffs: &CoefficientHistory,
    forcing: &SpaceTimeField,
    u0: &Field,
    u1: &Field,
    axis: TimeAxis,
) -> StateHistory {
    LinearSolver::new(SolverOptions::unmonitored()).solve(coeffs, forcing, u0, u1, axis).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_is_linear(
        seed in prop::collection::vec(-2.0f64..2.0, 4),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        c0 in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let grid = Grid::new(-1.0, 1.0, 41).unwrap();
        let axis = TimeAxis::new(0.3, 12).unwrap();
        let (coeffs, g1) = random_instance(&seed, grid, axis, 1.0);
        let (_, g2) = random_instance(&seed, grid, axis, 2.5);
        let shape = |c: f64, k: f64| {
            let mut f = Field::from_fn(grid, |x| c * (std::f64::consts::PI * k * (x + 1.0) / 2.0).sin());
            f.values[0] = 0.0;
            f.values[40] = 0.0;
            f
        };
        let (u0a_z, u1a, u0b) = (shape(c0[0], 1.0), shape(c0[1], 2.0), shape(c0[2], 3.0));
        let u1b = Field::zeros(grid);
        let ha = solve_with(&coeffs, &g1, &u0a_z, &u1a, axis);
        let hb = solve_with(&coeffs, &g2, &u0b, &u1b, axis);
        let mix = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| a * x + b * y).collect() };
        let g = SpaceTimeField { grid, axis, values: mix(&g1.values, &g2.values) };
        let u0 = Field::new(grid, mix(&u0a_z.values, &u0b.values)).unwrap();
        let u1 = Field::new(grid, mix(&u1a.values, &u1b.values)).unwrap();
        let h = solve_with(&coeffs, &g, &u0, &u1, axis);
        let want = mix(&ha.u.values, &hb.u.values);
        let scale = want.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (x, y) in h.u.values.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
    }
}
