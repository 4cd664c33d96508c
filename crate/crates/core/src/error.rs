//! Error type shared by all modules.

use thiserror::Error;

/// Failures raised by construction, solving and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mollifier under-resolved: epsilon = {epsilon} needs at least 4 grid spacings (dx = {dx})")]
    UnderResolvedKernel { epsilon: f64, dx: f64 },

    #[error("invalid mollifier scale {0}")]
    InvalidEpsilon(f64),

    #[error("invalid truncation radius {0}")]
    InvalidTruncation(f64),

    #[error("truncation blend not monotone for R = {r}: slope {slope} at x = {x}")]
    NonMonotoneBlend { r: f64, x: f64, slope: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time axis: {0}")]
    InvalidAxis(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("support margin violated: {0}")]
    MarginViolation(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },

    #[error(
        "boundary quiescence violated at step {step}: boundary zone max {zone_max:e} exceeds \
         1e-6 of interior max {interior_max:e}; enlarge the computational domain"
    )]
    Quiescence { step: usize, zone_max: f64, interior_max: f64 },

    #[error("zero or non-finite pivot in row {row}")]
    SingularMatrix { row: usize },

    #[error("Picard iteration did not converge within {iterations} iterations")]
    PicardNonConvergence { iterations: usize, diffs: Vec<f64>, ratios: Vec<f64> },

    #[error("Picard iteration diverging at iteration {iteration} (ratio > 1 three times in a row)")]
    PicardDivergence { iteration: usize, diffs: Vec<f64>, ratios: Vec<f64> },

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("window [{a}, {b}] touches the grid boundary")]
    WindowOutsideGrid { a: f64, b: f64 },

    #[error("load path leaves the grid at step {step} (x = {x})")]
    PathOutsideGrid { step: usize, x: f64 },

    #[error("test function support violation: {0}")]
    SupportViolation(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
