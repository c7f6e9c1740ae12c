//! Pseudospectral core for the coupled Klein-Gordon-Schrodinger system in
//! twisted variables, with uniformly accurate first and second order
//! exponential-type time steppers, the asymptotic limit flow, a splitting
//! baseline, and quadrature oracles that certify every closed-form
//! oscillatory-integral approximation the steppers are built from.

pub mod error;
pub mod field;
pub mod grid;
pub mod initial_data;
pub mod integrators;
pub mod oracle;
pub mod parallel;
pub mod symbol;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::Grid;
pub use initial_data::{
    load_state, make_state, random_sobolev, save_state, twist, untwist, KgsState, RegularitySpec,
    SplitMix64,
};
pub use integrators::{
    assemble_ipsi_tilde, assemble_iu_tilde, assemble_iu_tilde_with, closed_term, evolve,
    evolve_traced, limit_free_step, splitting_step, ua1_step, ua2_step, ua2_step_with, ClosedTerm,
    SchemeId, StepParams, TraceRow, Ua2Form,
};
pub use oracle::{
    duhamel_reference, leading_order_psi, leading_order_u, quad_integral, resolved_reference,
    GaussLegendre, OracleConfig, QuadTerm,
};
pub use symbol::{phi1, psi2, BaseKind, CParam, SchemeSymbols, Symbol};
