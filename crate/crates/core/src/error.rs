//! Error type shared by all numerical kernels.

/// Errors produced by grid construction, field algebra and the time steppers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields/symbols live on different grids")]
    GridMismatch,

    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("input field is not real-valued (conjugate-symmetry defect {defect:.3e})")]
    NotRealValued { defect: f64 },

    #[error("solution blew up (non-finite coefficient) at step {step}")]
    BlowUp { step: usize },

    #[error(
        "Picard iteration did not contract to {tol:.1e} after {iters} iterations \
         (last residual {residual:.3e}); reduce tau"
    )]
    PicardNonConvergence { iters: usize, residual: f64, tol: f64 },

    #[error("phase resolution violated: c^2*tau/panels = {0:.3} exceeds 0.5")]
    PhaseResolution(f64),

    #[error("step resolution violated: c^2*T/n_fine = {0:.3} exceeds 0.1")]
    StepResolution(f64),

    #[error("state i/o failed for {path}: {reason}")]
    StateIo { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
