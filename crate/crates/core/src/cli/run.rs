//! Run orchestration and report files.

use super::config::RunConfig;
use super::verify::{
    manufactured_study, plane_wave_phase_error, ManufacturedCase, ManufacturedPlan, ManufacturedReport,
};
use crate::analysis::{epsilon_sweep, EnergyLedger, SweepOptions, SweepReport};
use crate::error::{Error, Result};
use crate::fixed_point::resolve_r;
use crate::linear_solver::write_checkpoint;
use crate::model::{DiscreteProblem, Scenario, TruncationMode};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Environment variable that sets the worker count.
pub const WORKERS_ENV: &str = "GAOBEAM_WORKERS";

/// Exit statuses of the command-line tool.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_MEMBER_FAILURE: u8 = 2;

#[derive(Debug, Clone, Serialize)]
pub struct PlaneWaveRow {
    pub k: u32,
    pub phase_error: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct VerificationReport {
    pub plane_wave: Option<Vec<PlaneWaveRow>>,
    pub manufactured: Option<ManufacturedReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_final: f64,
    pub nt: usize,
}

/// Contents of `<stem>.report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub status: &'static str,
    pub grid: GridInfo,
    pub sweep: SweepReport,
    pub verification: Option<VerificationReport>,
}

/// Report plus the files that were written.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub exit_code: u8,
    pub files: Vec<PathBuf>,
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{s}'"))),
        },
    }
}

/// Runs `f` on a pool of `workers` threads, or the global pool for `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Checks everything a run needs short of solving: expressions, ranges,
/// kernel resolution and data support for every ladder member.
pub fn validate(config: &RunConfig) -> Result<()> {
    let scn = Scenario::new(&config.scenario)?;
    for &eps in &config.ladder {
        let reg = config.member_params(eps);
        reg.validate()?;
        let bound = match reg.truncation {
            TruncationMode::Auto { c_cap } => c_cap,
            TruncationMode::Explicit(r) => r * eps,
        };
        DiscreteProblem::new(&scn, config.grid, config.time, eps, resolve_r(&reg, eps, bound))?;
    }
    if let Some((a, b)) = config.window {
        if !(config.grid.x_min < a && a < b && b < config.grid.x_max) {
            return Err(Error::WindowOutsideGrid { a, b });
        }
    }
    Ok(())
}

/// Solves every ladder member, runs the diagnostics and writes the reports
/// into `out_dir` (the configured directory when `None`).
pub fn run(config: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let scn = Scenario::new(&config.scenario)?;
    let options = SweepOptions { window: config.window, solver: None };
    let sweep = epsilon_sweep(&scn, &config.ladder, config.grid, config.time, &config.regularization, options)?;
    let verification = verification(config)?;
    let ok = sweep.all_ok();
    let report = RunReport {
        status: if ok { "ok" } else { "member_failure" },
        grid: GridInfo {
            x_min: config.grid.x_min,
            x_max: config.grid.x_max,
            nx: config.grid.nx,
            t_final: config.time.t_final,
            nt: config.time.nt,
        },
        sweep,
        verification,
    };

    let dir = out_dir.map_or_else(|| config.outputs.dir.clone(), Path::to_path_buf);
    std::fs::create_dir_all(&dir)?;
    let stem = &config.outputs.stem;
    let mut files = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        files.push(path);
        Ok(())
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(format!("report encoding: {e}")))?;
    emit(format!("{stem}.report.json"), json + "\n")?;
    emit(format!("{stem}.energy.csv"), energy_csv(report.sweep.finest().map(|r| &r.ledger)))?;
    emit(format!("{stem}.sweep.csv"), sweep_csv(&report.sweep))?;
    if config.outputs.checkpoint {
        if let Some(run) = report.sweep.finest() {
            let path = dir.join(format!("{stem}.checkpoint"));
            write_checkpoint(&run.history, &path)?;
            files.push(path);
        }
    }
    Ok(RunOutcome { exit_code: if ok { EXIT_OK } else { EXIT_MEMBER_FAILURE }, report, files })
}

fn verification(config: &RunConfig) -> Result<Option<VerificationReport>> {
    let v = config.verification;
    if !v.periodic_mode && !v.manufactured {
        return Ok(None);
    }
    let mut out = VerificationReport::default();
    if v.periodic_mode {
        let rows = (1..=4)
            .map(|k| Ok(PlaneWaveRow { k, phase_error: plane_wave_phase_error(k, 256, 1000)? }))
            .collect::<Result<Vec<_>>>()?;
        out.plane_wave = Some(rows);
    }
    if v.manufactured {
        out.manufactured = Some(manufactured_study(&ManufacturedCase::UNIT, &ManufacturedPlan::unit())?);
    }
    Ok(Some(out))
}

/// Energy ledger rows; header only when no member succeeded.
pub fn energy_csv(ledger: Option<&EnergyLedger>) -> String {
    let mut s = String::from("step,time,kinetic,bending,nonlinear_mu,concentrated,tau_residual\n");
    if let Some(l) = ledger {
        for n in 0..l.times.len() {
            let _ = writeln!(
                s,
                "{},{:?},{:?},{:?},{:?},{:?},{:?}",
                n, l.times[n], l.kinetic[n], l.bending[n], l.nonlinear_mu[n], l.concentrated[n], l.tau_residual[n]
            );
        }
    }
    s
}

/// One row per consecutive pair of successful members.
pub fn sweep_csv(sweep: &SweepReport) -> String {
    let mut s = String::from(
        "eps_a,eps_b,h2alpha_diff,linf_ux_diff,l2_conv_diff,weak_regularized_residual,weak_limit_residual\n",
    );
    for p in &sweep.pairs {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            p.eps_a,
            p.eps_b,
            p.h2alpha_diff,
            p.linf_ux_diff,
            p.l2_conv_diff,
            p.weak_regularized_residual,
            p.weak_limit_residual
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ledger_has_header_only() {
        assert_eq!(energy_csv(None).lines().count(), 1);
    }

    #[test]
    fn floats_round_trip() {
        let l = EnergyLedger {
            times: vec![0.1],
            kinetic: vec![1.0 / 3.0],
            bending: vec![1e-300],
            nonlinear_mu: vec![0.0],
            concentrated: vec![2.5],
            tau_residual: vec![-7.0e-9],
            state_norm: vec![0.0],
        };
        let csv = energy_csv(Some(&l));
        let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 0.1, 1.0 / 3.0, 1e-300, 0.0, 2.5, -7.0e-9]);
    }
}
