//! Configuration, scenario expressions, run orchestration and reports.

pub mod config;
pub mod expr;
pub mod run;
pub mod verify;

pub use config::{parse_ladder, OutputConfig, RunConfig, VerificationConfig};
pub use run::{run, validate, RunOutcome, RunReport, EXIT_CONFIG, EXIT_MEMBER_FAILURE, EXIT_OK, WORKERS_ENV};

use clap::{Parser, Subcommand};
use std::path::PathBuf;

/// Command-line interface.
#[derive(Debug, Parser)]
#[command(name = "gaobeam", version, about = "Regularized moving-mass Gao beam runs and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured epsilon value or ladder and write reports.
    Run {
        config: PathBuf,
        /// Overrides `outputs.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check a config without solving.
    Validate { config: PathBuf },
    /// Solve along an explicit epsilon ladder.
    Sweep {
        config: PathBuf,
        /// Strictly decreasing comma list, e.g. 0.2,0.1,0.05.
        #[arg(long)]
        epsilons: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Executes a parsed command and returns the process exit status.
pub fn execute(cli: Cli) -> u8 {
    let workers = match run::workers_from_env() {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (path, ladder, out_dir, solve) = match cli.command {
        Command::Run { config, out_dir } => (config, None, out_dir, true),
        Command::Validate { config } => (config, None, None, false),
        Command::Sweep { config, epsilons, out_dir } => (config, Some(epsilons), out_dir, true),
    };
    let config = RunConfig::from_path(&path).and_then(|c| match ladder {
        Some(list) => c.with_ladder(parse_ladder(&list)?),
        None => Ok(c),
    });
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    if !solve {
        return match validate(&config) {
            Ok(()) => {
                println!("{}: ok ({} ladder member(s))", path.display(), config.ladder.len());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                EXIT_CONFIG
            }
        };
    }
    let outcome = run::with_workers(workers, || run(&config, out_dir.as_deref()));
    match outcome {
        Ok(Ok(out)) => {
            for m in out.report.sweep.members.iter().filter(|m| !m.ok) {
                eprintln!("member eps = {} failed: {}", m.epsilon, m.error.as_deref().unwrap_or("unknown"));
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            out.exit_code
        }
        Ok(Err(e)) | Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
