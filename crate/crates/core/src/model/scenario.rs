//! Scenario data, regularization parameters and pointwise coefficient fields.

use super::{Field, Grid};
use crate::cli::expr::{differentiate, parse_expression, Expression, Var};
use crate::error::{Error, Result};
use crate::kernels::{convolve, Mollifier, Order};

/// Expression sources for a scenario, as read from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSource {
    pub zeta: String,
    pub load: String,
    pub traction: String,
    pub distributed: String,
    pub u0: String,
    pub u1: String,
    pub nu: f64,
    pub mass_term_enabled: bool,
}

impl Default for ScenarioSource {
    fn default() -> Self {
        Self {
            zeta: "0".into(),
            load: "0".into(),
            traction: "0".into(),
            distributed: "0".into(),
            u0: "0".into(),
            u1: "0".into(),
            nu: 1.0,
            mass_term_enabled: true,
        }
    }
}

/// Problem data: load path `ζ`, point load `P`, traction `p`, distributed
/// load `f`, initial data `u₀`, `u₁`, and `ν`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub zeta: Expression,
    pub zeta_dot: Expression,
    pub zeta_ddot: Expression,
    pub load: Expression,
    pub traction: Expression,
    pub traction_x: Expression,
    pub distributed: Expression,
    pub u0: Expression,
    pub u1: Expression,
    pub u1_x: Expression,
    pub nu: f64,
    pub mass_term_enabled: bool,
}

fn parse_field(name: &str, src: &str) -> Result<Expression> {
    parse_expression(src).map_err(|e| match e {
        Error::Syntax { position, message } => Error::Syntax { position, message: format!("{name}: {message}") },
        other => other,
    })
}

impl Scenario {
    pub fn new(src: &ScenarioSource) -> Result<Self> {
        let zeta = parse_field("zeta", &src.zeta)?;
        let load = parse_field("P", &src.load)?;
        let traction = parse_field("p", &src.traction)?;
        let distributed = parse_field("f", &src.distributed)?;
        let u0 = parse_field("u0", &src.u0)?;
        let u1 = parse_field("u1", &src.u1)?;
        for (name, e) in [("zeta", &zeta), ("P", &load)] {
            if e.depends_on(Var::X) {
                return Err(Error::InvalidScenario(format!("{name} must depend on t only")));
            }
        }
        for (name, e) in [("u0", &u0), ("u1", &u1)] {
            if e.depends_on(Var::T) {
                return Err(Error::InvalidScenario(format!("{name} must depend on x only")));
            }
        }
        if !src.nu.is_finite() {
            return Err(Error::InvalidScenario(format!("nu must be finite, got {}", src.nu)));
        }
        Ok(Self {
            zeta_dot: differentiate(&zeta, Var::T, 1),
            zeta_ddot: differentiate(&zeta, Var::T, 2),
            traction_x: differentiate(&traction, Var::X, 1),
            u1_x: differentiate(&u1, Var::X, 1),
            zeta,
            load,
            traction,
            distributed,
            u0,
            u1,
            nu: src.nu,
            mass_term_enabled: src.mass_term_enabled,
        })
    }

    /// All data zero, load parked at the origin.
    pub fn zero() -> Self {
        Self::new(&ScenarioSource::default()).expect("zero scenario is valid")
    }

    /// Checks that `u₀`, `u₁`, `u₁′` are finite on the grid and that `u₀`,
    /// `u₁` and `f(t_n, ·)` vanish on the outer `margin` zone.
    pub fn check_support(&self, grid: &Grid, times: &[f64], margin: f64) -> Result<()> {
        let outer = |x: f64| x < grid.x_min + margin || x > grid.x_max - margin;
        for i in 0..grid.nx {
            let x = grid.x(i);
            let (a, b, c) = (self.u0.eval(0.0, x), self.u1.eval(0.0, x), self.u1_x.eval(0.0, x));
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                return Err(Error::InvalidScenario(format!("initial data not finite at x = {x}")));
            }
            if outer(x) && (a != 0.0 || b != 0.0) {
                return Err(Error::MarginViolation(format!(
                    "initial data nonzero at x = {x} inside the outer margin {margin}"
                )));
            }
        }
        if !self.distributed.is_zero() {
            for &t in times {
                for i in 0..grid.nx {
                    let x = grid.x(i);
                    if outer(x) && self.distributed.eval(t, x) != 0.0 {
                        return Err(Error::MarginViolation(format!(
                            "f nonzero at (t, x) = ({t}, {x}) inside the outer margin {margin}"
                        )));
                    }
                }
            }
        }
        for &t in times {
            let z = self.zeta.eval(t, 0.0);
            if !z.is_finite() || outer(z) {
                return Err(Error::MarginViolation(format!(
                    "load path zeta({t}) = {z} enters the outer margin {margin}"
                )));
            }
        }
        Ok(())
    }
}

/// How the truncation radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationMode {
    Explicit(f64),
    Auto { c_cap: f64 },
}

/// How the weighted-norm rate is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Explicit(f64),
    Auto,
}

/// Norm used by the Picard stopping test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMetric {
    WeightedGraph,
    L2,
}

/// Regularization and iteration controls for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationParams {
    pub epsilon: f64,
    pub truncation: TruncationMode,
    pub lambda: LambdaMode,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub stop_metric: StopMetric,
}

impl RegularizationParams {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            truncation: TruncationMode::Auto { c_cap: 3.0 },
            lambda: LambdaMode::Auto,
            picard_tol: 1e-10,
            picard_max_iter: 60,
            stop_metric: StopMetric::WeightedGraph,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if !(self.picard_tol.is_finite() && self.picard_tol > 0.0) {
            return Err(Error::Config(format!("picard_tol must be positive, got {}", self.picard_tol)));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::Config("picard_max_iter must be at least 1".into()));
        }
        match self.truncation {
            TruncationMode::Explicit(r) if !(r.is_finite() && r > 0.0) => return Err(Error::InvalidTruncation(r)),
            TruncationMode::Auto { c_cap } if !(c_cap.is_finite() && c_cap > 0.0) => {
                return Err(Error::Config(format!("C_cap must be positive, got {c_cap}")))
            }
            _ => {}
        }
        if let LambdaMode::Explicit(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        Ok(())
    }
}

/// `F = 1/(1 + θ^ε(x − ζ))`.
pub fn coefficient_f(m: &Mollifier, zeta_t: f64, x: f64) -> f64 {
    1.0 / (1.0 + m.eval(Order::Zero, x - zeta_t))
}

/// `G = −ζ̇ θ^ε′(x − ζ)/(1 + θ^ε(x − ζ))`.
pub fn coefficient_g(m: &Mollifier, zeta_t: f64, zeta_dot_t: f64, x: f64) -> f64 {
    -zeta_dot_t * m.eval(Order::One, x - zeta_t) / (1.0 + m.eval(Order::Zero, x - zeta_t))
}

/// `h^ε(t, ·) = −f(t, ·) − P(t) θ^ε(· − ζ(t))` on the grid, with the load
/// kernel moment matched at its current sub-grid position.
pub fn forcing_h(scn: &Scenario, m: &Mollifier, grid: &Grid, t: f64) -> Field {
    let mut values: Vec<f64> = (0..grid.nx).map(|i| -scn.distributed.eval(t, grid.x(i))).collect();
    let p = scn.load.eval(t, 0.0);
    if p != 0.0 {
        let k = m.place(grid, scn.zeta.eval(t, 0.0));
        for (j, v) in k.value.iter().enumerate() {
            values[k.start + j] -= p * v;
        }
    }
    Field { grid: *grid, values }
}

/// `(u₀ ⋆ θ^ε, u₁ ⋆ θ^ε)`; the data must vanish within `ε` of the boundary.
pub fn mollify_initial_data(scn: &Scenario, m: &Mollifier, grid: &Grid) -> Result<(Field, Field)> {
    let u0 = Field::from_fn(*grid, |x| scn.u0.eval(0.0, x));
    let u1 = Field::from_fn(*grid, |x| scn.u1.eval(0.0, x));
    let eps = m.epsilon();
    for (name, f) in [("u0", &u0), ("u1", &u1)] {
        for (i, &v) in f.values.iter().enumerate() {
            let x = grid.x(i);
            if (x <= grid.x_min + eps || x >= grid.x_max - eps) && v != 0.0 {
                return Err(Error::MarginViolation(format!(
                    "{name} nonzero at x = {x}, within epsilon of the boundary"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidScenario(format!("{name} not finite at x = {x}")));
            }
        }
    }
    Ok((convolve(&u0, m, Order::Zero)?, convolve(&u1, m, Order::Zero)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_mollifier;

    #[test]
    fn coefficient_examples() {
        let m = make_mollifier(0.1, 0.01).unwrap();
        assert_eq!(coefficient_f(&m, 0.3, 0.45), 1.0);
        let peak = m.eval(Order::Zero, 0.0);
        assert_eq!(coefficient_f(&m, 0.3, 0.3), 1.0 / (1.0 + peak));
        assert_eq!(coefficient_g(&m, 0.3, 0.0, 0.33), 0.0);
        assert_eq!(coefficient_g(&m, 0.3, 2.0, 0.3), 0.0);
        for s in [0.01, 0.037, 0.08] {
            let a = coefficient_g(&m, 0.3, 1.5, 0.3 + s);
            let b = coefficient_g(&m, 0.3, 1.5, 0.3 - s);
            assert!((a + b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn scenario_validation() {
        let mut s = ScenarioSource::default();
        s.zeta = "x".into();
        assert!(Scenario::new(&s).is_err());
        let mut s = ScenarioSource::default();
        s.u0 = "t".into();
        assert!(Scenario::new(&s).is_err());
        let mut s = ScenarioSource::default();
        s.load = "sin(".into();
        assert!(matches!(Scenario::new(&s), Err(Error::Syntax { .. })));
        let mut s = ScenarioSource::default();
        s.zeta = "0.5*t^2".into();
        let scn = Scenario::new(&s).unwrap();
        assert_eq!(scn.zeta_dot.eval(2.0, 0.0), 2.0);
        assert_eq!(scn.zeta_ddot.eval(2.0, 0.0), 1.0);
    }

    #[test]
    fn zero_forcing_and_unit_load_mass() {
        let grid = Grid::new(-2.0, 2.0, 401).unwrap();
        let m = make_mollifier(0.1, grid.dx()).unwrap();
        let zero = Scenario::zero();
        assert!(forcing_h(&zero, &m, &grid, 0.3).values.iter().all(|&v| v == 0.0));
        let src = ScenarioSource { zeta: "0.2 + 0.37*t".into(), load: "1".into(), ..Default::default() };
        let scn = Scenario::new(&src).unwrap();
        for t in [0.0, 0.123, 0.5, 0.77] {
            let h = forcing_h(&scn, &m, &grid, t);
            let mass: f64 = -crate::model::trapezoid(&h.values, grid.dx());
            assert!((mass - 1.0).abs() < 1e-8, "t = {t}: {mass}");
        }
    }

    #[test]
    fn margin_violation_is_rejected() {
        let grid = Grid::new(-1.0, 1.0, 201).unwrap();
        let m = make_mollifier(0.1, grid.dx()).unwrap();
        let src = ScenarioSource { u0: "1".into(), ..Default::default() };
        let scn = Scenario::new(&src).unwrap();
        assert!(matches!(mollify_initial_data(&scn, &m, &grid), Err(Error::MarginViolation(_))));
        let src = ScenarioSource { u1: "0".into(), ..Default::default() };
        let (a, b) = mollify_initial_data(&Scenario::new(&src).unwrap(), &m, &grid).unwrap();
        assert!(a.values.iter().chain(&b.values).all(|&v| v == 0.0));
    }
}
