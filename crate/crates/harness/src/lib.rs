//! Experiment engine for the KGS integrators: convergence studies with
//! self-referencing accuracy floors, asymptotic-consistency sweeps, oracle
//! defect gates, and CSV/SVG/JSON persistence.

pub mod config;
pub mod consistency;
pub mod convergence;
pub mod oracle_check;
pub mod report;
pub mod slopes;
pub mod svg;

pub use config::{
    dyadic_taus, parse_dyadic, parse_list, resolve_config, FileConfig, FlagOverrides, RunConfig,
};
pub use consistency::{run_consistency, ConsistencyReport};
pub use convergence::{run_convergence, run_convergence_multi};
pub use oracle_check::{gate_state, run_oracle_check, OracleReport};
pub use report::{
    emit_csv, emit_json, parse_csv, render_csv, ConvergenceReport, ConvergenceRow, SlopeFit,
};
pub use svg::{emit_svg, render_svg};

/// Errors of the experiment layer (configuration and I/O); numerical errors
/// bubble up from the core crate.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error for {path}: {reason}")]
    Io { path: String, reason: String },

    #[error(transparent)]
    Core(#[from] kgs_core::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
