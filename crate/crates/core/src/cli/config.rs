//! Flat `block.key = value` configuration files.
//!
//! Blank lines and text after `#` are ignored. Scenario entries are
//! expressions in `t` and `x`; everything else is a number, a boolean, a
//! comma list or a word such as `auto`.

use super::expr::Expression;
use crate::error::{Error, Result};
use crate::model::{Grid, LambdaMode, RegularizationParams, ScenarioSource, StopMetric, TimeAxis, TruncationMode};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Report destinations.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub stem: String,
    /// Also write a binary checkpoint of the finest member.
    pub checkpoint: bool,
}

/// Optional solver verification runs appended to the report.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VerificationConfig {
    pub periodic_mode: bool,
    pub manufactured: bool,
}

/// A fully parsed and range-checked run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub time: TimeAxis,
    pub scenario: ScenarioSource,
    /// Strictly decreasing `ε` values; a single entry for a plain run.
    pub ladder: Vec<f64>,
    /// Controls shared by all members; `epsilon` holds `ladder[0]`.
    pub regularization: RegularizationParams,
    pub outputs: OutputConfig,
    pub verification: VerificationConfig,
    /// Diagnostic window `K`; the central half of the grid when absent.
    pub window: Option<(f64, f64)>,
}

struct Entry {
    value: String,
    line: usize,
    /// 1-based column of the first value character.
    column: usize,
}

const KEYS: &[&str] = &[
    "grid.x_min",
    "grid.x_max",
    "grid.nx",
    "time.T",
    "time.nt",
    "scenario.zeta",
    "scenario.P",
    "scenario.p",
    "scenario.f",
    "scenario.u0",
    "scenario.u1",
    "scenario.nu",
    "scenario.mass_term_enabled",
    "regularization.epsilon",
    "regularization.ladder",
    "regularization.R",
    "regularization.C_cap",
    "regularization.lambda",
    "regularization.picard_tol",
    "regularization.picard_max_iter",
    "regularization.stop_metric",
    "outputs.dir",
    "outputs.stem",
    "outputs.checkpoint",
    "verification.periodic_mode",
    "verification.manufactured",
    "analysis.window_a",
    "analysis.window_b",
];

fn at(line: usize, column: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}, column {column}: {msg}"))
}

fn lines(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut map: BTreeMap<String, Entry> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(at(line, 1, "expected 'key = value'"));
        };
        let key = body[..eq].trim();
        if !KEYS.contains(&key) {
            let col = body.find(key).unwrap_or(0) + 1;
            return Err(at(line, col, format!("unknown key '{key}'")));
        }
        let rest = &body[eq + 1..];
        let lead = rest.len() - rest.trim_start().len();
        let value = rest.trim().to_string();
        if value.is_empty() {
            return Err(at(line, eq + 2, format!("missing value for '{key}'")));
        }
        let column = eq + 2 + lead;
        if let Some(prev) = map.get(key) {
            return Err(at(line, 1, format!("duplicate key '{key}' (first set on line {})", prev.line)));
        }
        map.insert(key.to_string(), Entry { value, line, column });
    }
    Ok(map)
}

struct Reader {
    map: BTreeMap<String, Entry>,
}

impl Reader {
    fn entry(&self, key: &str) -> Option<&Entry> {
        self.map.get(key)
    }

    fn required(&self, key: &str) -> Result<&Entry> {
        self.entry(key).ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    fn number(e: &Entry, key: &str) -> Result<f64> {
        match e.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(at(e.line, e.column, format!("'{key}' expects a finite number, got '{}'", e.value))),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        Self::number(self.required(key)?, key)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.entry(key).map(|e| Self::number(e, key)).transpose()
    }

    fn usize_of(e: &Entry, key: &str) -> Result<usize> {
        e.value
            .parse::<usize>()
            .map_err(|_| at(e.line, e.column, format!("'{key}' expects a non-negative integer, got '{}'", e.value)))
    }

    fn usize_req(&self, key: &str) -> Result<usize> {
        Self::usize_of(self.required(key)?, key)
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        self.entry(key).map(|e| Self::usize_of(e, key)).transpose()
    }

    fn bool_opt(&self, key: &str) -> Result<Option<bool>> {
        self.entry(key)
            .map(|e| match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(at(e.line, e.column, format!("'{key}' expects true or false, got '{}'", e.value))),
            })
            .transpose()
    }

    /// Expression source, parsed here so errors carry the file position.
    fn expr(&self, key: &str) -> Result<String> {
        let Some(e) = self.entry(key) else { return Ok("0".into()) };
        match Expression::parse(&e.value) {
            Ok(_) => Ok(e.value.clone()),
            Err(Error::Syntax { position, message }) => Err(at(e.line, e.column + position, message)),
            Err(other) => Err(other),
        }
    }
}

/// Parses comma-separated `ε` values.
pub fn parse_ladder(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| Error::Config(format!("invalid epsilon '{s}'")))
        })
        .collect()
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::Config("empty epsilon ladder".into()));
    }
    if ladder.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::Config(format!("epsilons must be positive, got {ladder:?}")));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!("epsilon ladder must be strictly decreasing, got {ladder:?}")));
    }
    Ok(())
}

impl RunConfig {
    /// Parses and validates configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let r = Reader { map: lines(text)? };

        let grid = Grid::new(r.f64_req("grid.x_min")?, r.f64_req("grid.x_max")?, r.usize_req("grid.nx")?)?;
        let time = TimeAxis::new(r.f64_req("time.T")?, r.usize_req("time.nt")?)?;

        let defaults = ScenarioSource::default();
        let scenario = ScenarioSource {
            zeta: r.expr("scenario.zeta")?,
            load: r.expr("scenario.P")?,
            traction: r.expr("scenario.p")?,
            distributed: r.expr("scenario.f")?,
            u0: r.expr("scenario.u0")?,
            u1: r.expr("scenario.u1")?,
            nu: r.f64_opt("scenario.nu")?.unwrap_or(defaults.nu),
            mass_term_enabled: r.bool_opt("scenario.mass_term_enabled")?.unwrap_or(defaults.mass_term_enabled),
        };

        let ladder = match (r.entry("regularization.epsilon"), r.entry("regularization.ladder")) {
            (Some(_), Some(e)) => {
                return Err(at(e.line, 1, "set either regularization.epsilon or regularization.ladder, not both"))
            }
            (Some(_), None) => vec![r.f64_req("regularization.epsilon")?],
            (None, Some(e)) => parse_ladder(&e.value).map_err(|err| at(e.line, e.column, err))?,
            (None, None) => {
                return Err(Error::Config("missing regularization.epsilon or regularization.ladder".into()))
            }
        };
        check_ladder(&ladder)?;

        let mut reg = RegularizationParams::new(ladder[0]);
        let c_cap = r.f64_opt("regularization.C_cap")?;
        reg.truncation = match r.entry("regularization.R") {
            None => TruncationMode::Auto { c_cap: c_cap.unwrap_or(3.0) },
            Some(e) if e.value == "auto" => TruncationMode::Auto { c_cap: c_cap.unwrap_or(3.0) },
            Some(e) => TruncationMode::Explicit(Reader::number(e, "regularization.R")?),
        };
        reg.lambda = match r.entry("regularization.lambda") {
            None => LambdaMode::Auto,
            Some(e) if e.value == "auto" => LambdaMode::Auto,
            Some(e) => LambdaMode::Explicit(Reader::number(e, "regularization.lambda")?),
        };
        if let Some(v) = r.f64_opt("regularization.picard_tol")? {
            reg.picard_tol = v;
        }
        if let Some(v) = r.usize_opt("regularization.picard_max_iter")? {
            reg.picard_max_iter = v;
        }
        if let Some(e) = r.entry("regularization.stop_metric") {
            reg.stop_metric = match e.value.as_str() {
                "weighted" => StopMetric::WeightedGraph,
                "l2" => StopMetric::L2,
                v => return Err(at(e.line, e.column, format!("stop_metric expects 'weighted' or 'l2', got '{v}'"))),
            };
        }
        reg.validate()?;

        let outputs = OutputConfig {
            dir: r.entry("outputs.dir").map_or_else(|| PathBuf::from("."), |e| PathBuf::from(&e.value)),
            stem: r.entry("outputs.stem").map_or_else(|| "run".to_string(), |e| e.value.clone()),
            checkpoint: r.bool_opt("outputs.checkpoint")?.unwrap_or(false),
        };
        if outputs.stem.contains(['/', '\\']) {
            return Err(Error::Config(format!("outputs.stem must be a plain file stem, got '{}'", outputs.stem)));
        }
        let verification = VerificationConfig {
            periodic_mode: r.bool_opt("verification.periodic_mode")?.unwrap_or(false),
            manufactured: r.bool_opt("verification.manufactured")?.unwrap_or(false),
        };
        let window = match (r.f64_opt("analysis.window_a")?, r.f64_opt("analysis.window_b")?) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::Config("analysis.window_a and analysis.window_b must be set together".into())),
        };

        Ok(Self { grid, time, scenario, ladder, regularization: reg, outputs, verification, window })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Replaces the ladder, e.g. from a command-line list.
    pub fn with_ladder(mut self, ladder: Vec<f64>) -> Result<Self> {
        check_ladder(&ladder)?;
        self.regularization.epsilon = ladder[0];
        self.ladder = ladder;
        Ok(self)
    }

    /// Controls for member `ε`.
    pub fn member_params(&self, epsilon: f64) -> RegularizationParams {
        RegularizationParams { epsilon, ..self.regularization }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "grid.x_min = -4\ngrid.x_max = 4\ngrid.nx = 161\ntime.T = 0.1\ntime.nt = 10\n";

    #[test]
    fn minimal_config() {
        let c = RunConfig::parse(&format!("{BASE}regularization.epsilon = 0.2 # comment\n")).unwrap();
        assert_eq!(c.ladder, vec![0.2]);
        assert_eq!(c.scenario.zeta, "0");
        assert_eq!(c.outputs.stem, "run");
        assert!(matches!(c.regularization.truncation, TruncationMode::Auto { c_cap } if c_cap == 3.0));
    }

    #[test]
    fn ladder_and_modes() {
        let text = format!(
            "{BASE}regularization.ladder = 0.4, 0.2\nregularization.R = 50\nregularization.lambda = 2.5\n\
             regularization.stop_metric = l2\nanalysis.window_a = -1\nanalysis.window_b = 1\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.ladder, vec![0.4, 0.2]);
        assert_eq!(c.regularization.truncation, TruncationMode::Explicit(50.0));
        assert_eq!(c.regularization.lambda, LambdaMode::Explicit(2.5));
        assert_eq!(c.regularization.stop_metric, StopMetric::L2);
        assert_eq!(c.window, Some((-1.0, 1.0)));
        assert_eq!(c.member_params(0.2).epsilon, 0.2);
    }

    #[test]
    fn malformed_expression_reports_position() {
        let text = format!("{BASE}regularization.epsilon = 0.2\nscenario.zeta = 0.5*(t+1\n");
        let msg = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("line 7, column"), "{msg}");
    }

    #[test]
    fn rejects_bad_input() {
        for extra in [
            "regularization.epsilon = 0.2\ngrid.bogus = 1\n",
            "regularization.ladder = 0.1, 0.2\n",
            "regularization.epsilon = 0.2\nregularization.epsilon = 0.1\n",
            "regularization.epsilon = abc\n",
            "",
            "regularization.epsilon = 0.2\nnot a pair\n",
        ] {
            assert!(RunConfig::parse(&format!("{BASE}{extra}")).is_err(), "{extra}");
        }
    }
}
