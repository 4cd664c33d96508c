//! Diagnostics of computed histories: localized Sobolev norms, traces along
//! the load path, energy bookkeeping, weak-form residuals and `ε` sweeps.

mod energy;
mod norms;
mod sweep;
mod weak;

pub use energy::{energy_ledger, uniform_bound_check, uniform_ratio, EnergyLedger};
pub use norms::{interpolate, sobolev_norm, trace, window, SobolevNorm, SobolevNormSpec, TraceKind};
pub use sweep::{
    epsilon_sweep, run_member, MemberReport, MemberRun, MemberSummary, PairReport, SweepOptions, SweepReport,
};
pub use weak::{
    default_battery, dirac_ibp_identities, dirac_ibp_identity, initial_datum_check, quadrature_weights,
    trace_identity_gap, weak_residual_limit, weak_residual_regularized, weak_residuals_limit,
    weak_residuals_regularized, Quadrature, TestFunction,
};
