use gaobeam::kernels::{make_mollifier, Order};
use gaobeam::model::{
    coefficient_f, coefficient_g, forcing_h, mollify_initial_data, trapezoid, DiscreteProblem, Grid, Scenario,
    ScenarioSource, TimeAxis,
};
use proptest::prelude::*;

fn scenario(zeta: &str, p: &str, f: &str, u0: &str, u1: &str) -> Scenario {
    Scenario::new(&ScenarioSource {
        zeta: zeta.into(),
        load: p.into(),
        distributed: f.into(),
        u0: u0.into(),
        u1: u1.into(),
        ..ScenarioSource::default()
    })
    .unwrap()
}

#[test]
fn coefficient_f_examples() {
    let m = make_mollifier(0.2, 0.01).unwrap();
    assert_eq!(coefficient_f(&m, 0.3, 0.3 + 0.25), 1.0);
    let peak = 4.142_844_199_345_525;
    assert!((coefficient_f(&m, 0.3, 0.3) - 1.0 / (1.0 + peak)).abs() < 1e-12);
    for i in 0..=400 {
        let v = coefficient_f(&m, 0.0, -0.3 + 0.6 * i as f64 / 400.0);
        assert!(v > 0.0 && v <= 1.0);
    }
}

#[test]
fn coefficient_g_examples() {
    let m = make_mollifier(0.2, 0.01).unwrap();
    assert_eq!(coefficient_g(&m, 0.4, 0.0, 0.45), 0.0);
    assert_eq!(coefficient_g(&m, 0.4, 1.5, 0.4), 0.0);
    for s in [0.01, 0.05, 0.11, 0.19] {
        let a = coefficient_g(&m, 0.4, 1.5, 0.4 + s);
        let b = coefficient_g(&m, 0.4, 1.5, 0.4 - s);
        assert!((a + b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn forcing_examples() {
    let grid = Grid::new(-3.0, 3.0, 601).unwrap();
    let m = make_mollifier(0.2, grid.dx()).unwrap();
    let zero = Scenario::zero();
    assert!(forcing_h(&zero, &m, &grid, 0.3).values.iter().all(|&v| v == 0.0));

    let unit = scenario("0.1+t", "1", "0", "0", "0");
    let h = forcing_h(&unit, &m, &grid, 0.37);
    let mass = -trapezoid(&h.values, grid.dx());
    assert!((mass - 1.0).abs() < 1e-8);
}

#[test]
fn forcing_matches_pointwise_evaluation() {
    let grid = Grid::new(-3.0, 3.0, 1201).unwrap();
    let m = make_mollifier(0.25, grid.dx()).unwrap();
    let scn = scenario("0.2*sin(3*t)", "2+cos(t)", "bump(x/2)*t", "0", "0");
    for t in [0.0, 0.13, 0.71] {
        let h = forcing_h(&scn, &m, &grid, t);
        let z = 0.2 * (3.0 * t).sin();
        let p = 2.0 + t.cos();
        let peak = m.eval(Order::Zero, 0.0);
        for i in 0..grid.nx {
            let x = grid.x(i);
            let y = x / 2.0;
            let f = if y.abs() < 1.0 { (-1.0 / (1.0 - y * y)).exp() * t } else { 0.0 };
            let direct = -f - p * m.eval(Order::Zero, x - z);
            assert!((h.values[i] - direct).abs() <= 1e-6 * p * peak, "t {t} x {x}");
        }
    }
}

#[test]
fn mollified_initial_data() {
    let grid = Grid::new(-6.0, 6.0, 1201).unwrap();
    let plateau = scenario("0", "0", "0", "bump(x/4)/bump(0)", "0");
    let m = make_mollifier(0.1, grid.dx()).unwrap();
    let (u0, u1) = mollify_initial_data(&plateau, &m, &grid).unwrap();
    assert!(u1.values.iter().all(|&v| v == 0.0));
    let mid = grid.nx / 2;
    assert!((u0.values[mid] - 1.0).abs() < 1e-3);

    let smooth = scenario("0", "0", "0", "bump(x/2)", "0");
    let errs: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let m = make_mollifier(eps, grid.dx()).unwrap();
            let (u0e, _) = mollify_initial_data(&smooth, &m, &grid).unwrap();
            let d: Vec<f64> = (0..grid.nx).map(|i| (u0e.values[i] - smooth.u0.eval(0.0, grid.x(i))).powi(2)).collect();
            trapezoid(&d, grid.dx()).sqrt()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");

    let edge = scenario("0", "0", "0", "bump(x-5.5)", "0");
    assert!(mollify_initial_data(&edge, &m, &grid).is_err());
}

#[test]
fn problem_coefficients_obey_identities() {
    let grid = Grid::new(-4.0, 4.0, 801).unwrap();
    let axis = TimeAxis::new(0.4, 8).unwrap();
    let scn = scenario("-0.5+2*t+t^2", "1", "0", "0", "0");
    let p = DiscreteProblem::new(&scn, grid, axis, 0.2, 15.0).unwrap();
    let (mut f, mut g) = (vec![0.0; grid.nx], vec![0.0; grid.nx]);
    for n in 0..axis.levels() {
        p.fill_coefficients(n, &mut f, &mut g);
        let theta = p.mass_kernel(n);
        let k = &p.load_kernels[n];
        let zd = p.path[n].zeta_dot;
        for i in 0..grid.nx {
            assert!((f[i] * (1.0 + theta[i]) - 1.0).abs() < 1e-14);
            assert!((g[i] + zd * k.slope_at(i) * f[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn problem_is_deterministic_and_checks_margin() {
    let grid = Grid::new(-4.0, 4.0, 401).unwrap();
    let axis = TimeAxis::new(0.5, 10).unwrap();
    let scn = scenario("t", "1+t", "bump(x)", "bump(x/2)", "0.1*bump(x)");
    let a = DiscreteProblem::new(&scn, grid, axis, 0.2, 15.0).unwrap();
    let b = DiscreteProblem::new(&scn, grid, axis, 0.2, 15.0).unwrap();
    assert_eq!(a.h.values, b.h.values);
    assert_eq!(a.u0_eps.values, b.u0_eps.values);
    let outer = |v: &[f64]| v[..8].iter().chain(&v[grid.nx - 8..]).all(|&x| x == 0.0);
    assert!(outer(&a.u0.values) && outer(&a.u1.values));

    let wandering = scenario("3.5*t", "1", "0", "0", "0");
    assert!(DiscreteProblem::new(&wandering, grid, TimeAxis::new(1.0, 10).unwrap(), 0.2, 15.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reciprocal_identities(zeta in -1.0f64..1.0, zd in -3.0f64..3.0, x in -1.5f64..1.5, eps in 0.05f64..0.5) {
        let m = make_mollifier(eps, eps / 8.0).unwrap();
        let f = coefficient_f(&m, zeta, x);
        let theta = m.eval(Order::Zero, x - zeta);
        prop_assert!((f * (1.0 + theta) - 1.0).abs() < 1e-14);
        let g = coefficient_g(&m, zeta, zd, x);
        prop_assert!((g + zd * m.eval(Order::One, x - zeta) * f).abs() <= 1e-12 * (1.0 + g.abs()));
    }
}
