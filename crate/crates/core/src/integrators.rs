//! Time steppers for the twisted first order system
//!
//! ```text
//! i du/dt  + c<nabla>_c u - c<nabla>_c^{-1} |psi|^2 = 0
//! i dpsi/dt + (1/2) Delta psi + (1/2) psi (u + conj u) = 0
//! ```
//!
//! Four flows are provided: the first and second order exponential-type
//! integrators (`Ua1`, `Ua2`), the free limit flow they approach for large
//! `c` (`LimitFree`), and a Lie splitting baseline (`LieSplitting`).
//!
//! Both components of every step read the *old* state (Jacobi coupling); the
//! second order remainder sums are transcribed term by term with each
//! multiplier applied to exactly the factor it is written against, see
//! [`assemble_iu_tilde`] and [`assemble_ipsi_tilde`].

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::initial_data::{untwist, KgsState};
use crate::symbol::{CParam, SchemeSymbols};

/// Time step parameters. There is deliberately no upper restriction on
/// `tau` relative to `c`.
#[derive(Clone, Copy, Debug)]
pub struct StepParams {
    pub c: CParam,
    pub tau: f64,
}

impl StepParams {
    pub fn new(c: CParam, tau: f64) -> Result<StepParams> {
        if tau > 0.0 && tau.is_finite() {
            Ok(StepParams { c, tau })
        } else {
            Err(Error::InvalidParam(format!("tau must be positive and finite, got {tau}")))
        }
    }

    pub fn symbols(&self, grid: &crate::grid::Grid) -> Arc<SchemeSymbols> {
        SchemeSymbols::get(grid, self.c, self.tau)
    }
}

/// Scheme selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    Ua1,
    Ua2,
    #[serde(rename = "limit")]
    LimitFree,
    #[serde(rename = "splitting")]
    LieSplitting,
}

impl SchemeId {
    pub fn parse(s: &str) -> Result<SchemeId> {
        match s {
            "ua1" => Ok(SchemeId::Ua1),
            "ua2" => Ok(SchemeId::Ua2),
            "limit" => Ok(SchemeId::LimitFree),
            "splitting" => Ok(SchemeId::LieSplitting),
            other => Err(Error::InvalidParam(format!(
                "unknown scheme {other:?} (expected ua1|ua2|limit|splitting)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeId::Ua1 => "ua1",
            SchemeId::Ua2 => "ua2",
            SchemeId::LimitFree => "limit",
            SchemeId::LieSplitting => "splitting",
        }
    }

    /// Nominal convergence order (the limit flow is listed as its formal
    /// consistency order in `tau` for fixed finite `c`, which is 0).
    pub fn order(&self) -> f64 {
        match self {
            SchemeId::Ua1 => 1.0,
            SchemeId::Ua2 => 2.0,
            SchemeId::LimitFree => 0.0,
            SchemeId::LieSplitting => 1.0,
        }
    }
}

/// Assembly variants for two second order remainder multipliers, exposed for
/// debugging comparisons only. Each alternative changes exactly one argument
/// choice relative to `Standard`, and the variants differ from it only at
/// higher order in `tau` or in `1/c^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Ua2Form {
    #[default]
    Standard,
    /// Up-shifted difference multipliers (arguments `Delta + 2c^2`,
    /// `Delta + c^2`, `Delta`, with swapped conjugate roles) in the quadratic
    /// `u`-equation remainder. This variant loses the term's cubic defect
    /// order near `tau c^2 ~ 1`; kept to document the difference.
    UpshiftedI2,
    /// `Psi2(i tau (Delta - c^2))` instead of `Psi2(i tau R)` inside the
    /// quadratic correction of the leading `u`-equation term.
    LaplacianPsi2,
}

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn ensure_finite(state: KgsState, step: usize) -> Result<KgsState> {
    if state.is_finite() {
        Ok(state)
    } else {
        Err(Error::BlowUp { step })
    }
}

fn ua1_with(state: &KgsState, sy: &SchemeSymbols) -> Result<KgsState> {
    let tau = sy.tau;
    let (u, psi) = (&state.u, &state.psi);

    // u update: e^{i tau c<nabla>_c} u - i tau c<nabla>_c^{-1} e^{i tau c<nabla>_c}
    //           [ conj(psi) . phi1(i tau (Delta - c^2)) psi ]
    let nl = psi.conj_field().pointwise_product(&psi.apply_symbol(&sy.phi1_dm)?)?;
    let kick = nl
        .apply_symbol(&sy.exp_cnabla)?
        .apply_symbol(&sy.inv_cnabla)?
        .scaled(-I * re(tau));
    let u_next = &u.apply_symbol(&sy.exp_cnabla)? + &kick;

    // psi update: e^{i tau Delta/2} psi + tau (i/2) e^{i tau Delta/2}
    //             [ psi . ( phi1(i tau (c<nabla>_c - Delta/2)) u
    //                     + phi1(-i tau (c<nabla>_c + Delta/2)) conj(u) ) ]
    let bracket = &u.apply_symbol(&sy.phi1_am)? + &u.conj_field().apply_symbol(&sy.phi1_ap_neg)?;
    let coupled = psi.pointwise_product(&bracket)?;
    let psi_next = &psi.apply_symbol(&sy.exp_half_lap)?
        + &coupled.apply_symbol(&sy.exp_half_lap)?.scaled(I * re(0.5 * tau));

    ensure_finite(KgsState::new(u_next, psi_next)?, 0)
}

/// One step of the first order scheme.
pub fn ua1_step(state: &KgsState, p: &StepParams) -> Result<KgsState> {
    ua1_with(state, &p.symbols(state.grid()))
}

fn i1_with(u: &Field, psi: &Field, sy: &SchemeSymbols, form: Ua2Form) -> Result<Field> {
    let _ = u;
    let tau = sy.tau;
    let v = psi;
    let vb = v.conj_field();
    // tau [ vb.(phi1 v)
    //     + e^{+i tau Delta/2}( (e^{-i tau Delta/2} Psi2 v).(e^{-i tau Delta/2} vb) )
    //     - vb.(Psi2 v) ]
    // - i tau^2 phi1(i tau R) R ( vb . Psi2(i tau R) v ),
    // R = c<nabla>_c - c^2 + Delta/2
    let t1 = vb.pointwise_product(&v.apply_symbol(&sy.phi1_dm)?)?;
    let smooth = v.apply_symbol(&sy.psi2_dm)?;
    let t2 = smooth
        .apply_symbol(&sy.exp_half_lap_neg)?
        .pointwise_product(&vb.apply_symbol(&sy.exp_half_lap_neg)?)?
        .apply_symbol(&sy.exp_half_lap)?;
    let t3 = vb.pointwise_product(&smooth)?;
    let psi2_corr = match form {
        Ua2Form::LaplacianPsi2 => &sy.psi2_dm,
        _ => &sy.psi2_res,
    };
    let corr = vb
        .pointwise_product(&v.apply_symbol(psi2_corr)?)?
        .apply_symbol(&sy.phi1_res_res)?;
    Ok(&(&(&t1 + &t2) - &t3).scaled(re(tau)) - &corr.scaled(I * re(tau * tau)))
}

fn i2_with(u: &Field, psi: &Field, sy: &SchemeSymbols, form: Ua2Form) -> Result<Field> {
    let tau = sy.tau;
    let c2 = sy.c.squared();
    let (v, w) = (psi, u);
    // (tau / 2c^2) vb . [ A (v w) -/+ B (v wb) ], difference multipliers
    // applied to the products
    let vw = v.pointwise_product(w)?;
    let vwb = v.pointwise_product(&w.conj_field())?;
    let bracket = match form {
        Ua2Form::UpshiftedI2 => &vw.apply_symbol(&sy.i2_up_a)? - &vwb.apply_symbol(&sy.i2_up_b)?,
        _ => &vw.apply_symbol(&sy.i2_a)? + &vwb.apply_symbol(&sy.i2_b)?,
    };
    Ok(v.conj_field().pointwise_product(&bracket)?.scaled(re(0.5 * tau / c2)))
}

fn i3_with(u: &Field, psi: &Field, sy: &SchemeSymbols) -> Result<Field> {
    let tau = sy.tau;
    let c2 = sy.c.squared();
    let (v, w) = (psi, u);
    let vb = v.conj_field();
    // (tau / 2c^2) [ -(vb w).(A v) + (vb wb).(B v) ], multipliers applied to
    // the trailing v
    let av = v.apply_symbol(&sy.i3_a)?;
    let bv = v.apply_symbol(&sy.i3_b)?;
    let vbw = vb.pointwise_product(w)?;
    let vbwb = vb.pointwise_product(&w.conj_field())?;
    Ok((&vbwb.pointwise_product(&bv)? - &vbw.pointwise_product(&av)?).scaled(re(0.5 * tau / c2)))
}

fn iu_tilde_with(u: &Field, psi: &Field, sy: &SchemeSymbols, form: Ua2Form) -> Result<Field> {
    let i1 = i1_with(u, psi, sy, form)?;
    let i2 = i2_with(u, psi, sy, form)?;
    let i3 = i3_with(u, psi, sy)?;
    Ok(&(&i1 + &i2) + &i3)
}

/// The second order approximation of the oscillatory integral in the `u`
/// equation, assembled term by term.
pub fn assemble_iu_tilde(u: &Field, psi: &Field, p: &StepParams) -> Result<Field> {
    iu_tilde_with(u, psi, &p.symbols(u.grid()), Ua2Form::Standard)
}

/// [`assemble_iu_tilde`] with an explicit [`Ua2Form`].
pub fn assemble_iu_tilde_with(
    u: &Field,
    psi: &Field,
    p: &StepParams,
    form: Ua2Form,
) -> Result<Field> {
    iu_tilde_with(u, psi, &p.symbols(u.grid()), form)
}

fn j1_with(u: &Field, psi: &Field, sy: &SchemeSymbols) -> Result<Field> {
    let tau = sy.tau;
    let (v, w) = (psi, u);
    let wb = w.conj_field();
    // tau [ v.(phi1- w + phi1+ wb)
    //     + e^{-i tau Delta/2}( (e^{+i tau Delta/2} v)
    //         . e^{+i tau Delta/2}(Psi2- w + Psi2+ wb) )
    //     - v.(Psi2- w + Psi2+ wb) ]
    let lead = &w.apply_symbol(&sy.phi1_am)? + &wb.apply_symbol(&sy.phi1_ap_neg)?;
    let smooth = &w.apply_symbol(&sy.psi2_am)? + &wb.apply_symbol(&sy.psi2_ap_neg)?;
    let sandwich = v
        .apply_symbol(&sy.exp_half_lap)?
        .pointwise_product(&smooth.apply_symbol(&sy.exp_half_lap)?)?
        .apply_symbol(&sy.exp_half_lap_neg)?;
    Ok((&(&v.pointwise_product(&lead)? + &sandwich) - &v.pointwise_product(&smooth)?)
        .scaled(re(tau)))
}

/// The four quadratic remainder terms: multipliers act on the trailing
/// `w` / `conj(w)`, pointwise prefactors are `(v w)` and `(v conj w)`.
fn j2x_with(u: &Field, psi: &Field, sy: &SchemeSymbols, which: usize) -> Result<Field> {
    let half = re(0.5 * sy.tau / sy.c.squared());
    let (v, w) = (psi, u);
    let wb = w.conj_field();
    match which {
        1 => Ok(v
            .pointwise_product(w)?
            .pointwise_product(&w.apply_symbol(&sy.j21)?)?
            .scaled(half)),
        2 => Ok(v
            .pointwise_product(w)?
            .pointwise_product(&wb.apply_symbol(&sy.j22)?)?
            .scaled(half)),
        3 => Ok(v
            .pointwise_product(&wb)?
            .pointwise_product(&w.apply_symbol(&sy.j23)?)?
            .scaled(-half)),
        4 => Ok(v
            .pointwise_product(&wb)?
            .pointwise_product(&wb.apply_symbol(&sy.j24)?)?
            .scaled(-half)),
        _ => unreachable!(),
    }
}

/// The two cubic remainder terms: `(tau/c^2) v . ( [phi1 diff] c<nabla>_c^{-1} |v|^2 )`.
fn j3x_with(psi: &Field, sy: &SchemeSymbols, which: usize) -> Result<Field> {
    let full = re(sy.tau / sy.c.squared());
    let v = psi;
    let dens = v.pointwise_product(&v.conj_field())?.apply_symbol(&sy.inv_cnabla)?;
    let diff = if which == 1 { &sy.j31 } else { &sy.j32 };
    Ok(v.pointwise_product(&dens.apply_symbol(diff)?)?.scaled(full))
}

fn ipsi_tilde_with(u: &Field, psi: &Field, sy: &SchemeSymbols) -> Result<Field> {
    let j1 = j1_with(u, psi, sy)?;
    let quad = &(&j2x_with(u, psi, sy, 1)? + &j2x_with(u, psi, sy, 2)?)
        + &(&j2x_with(u, psi, sy, 3)? + &j2x_with(u, psi, sy, 4)?);
    let cubic = &j3x_with(psi, sy, 1)? + &j3x_with(psi, sy, 2)?;
    Ok(&(&j1 + &quad) + &cubic)
}

/// Closed-form counterpart of one oscillatory sub-integral, for defect gates
/// against direct quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedTerm {
    IuFull,
    IpsiFull,
    I1,
    I2,
    I3,
    J1,
    J21,
    J22,
    J23,
    J24,
    J31,
    J32,
}

/// Evaluate one closed-form term with `v = psi`, `w = u`.
pub fn closed_term(
    term: ClosedTerm,
    u: &Field,
    psi: &Field,
    p: &StepParams,
    form: Ua2Form,
) -> Result<Field> {
    let sy = p.symbols(u.grid());
    match term {
        ClosedTerm::IuFull => iu_tilde_with(u, psi, &sy, form),
        ClosedTerm::IpsiFull => ipsi_tilde_with(u, psi, &sy),
        ClosedTerm::I1 => i1_with(u, psi, &sy, form),
        ClosedTerm::I2 => i2_with(u, psi, &sy, form),
        ClosedTerm::I3 => i3_with(u, psi, &sy),
        ClosedTerm::J1 => j1_with(u, psi, &sy),
        ClosedTerm::J21 => j2x_with(u, psi, &sy, 1),
        ClosedTerm::J22 => j2x_with(u, psi, &sy, 2),
        ClosedTerm::J23 => j2x_with(u, psi, &sy, 3),
        ClosedTerm::J24 => j2x_with(u, psi, &sy, 4),
        ClosedTerm::J31 => j3x_with(psi, &sy, 1),
        ClosedTerm::J32 => j3x_with(psi, &sy, 2),
    }
}

/// The second order approximation of the oscillatory integral in the `psi`
/// equation, assembled term by term.
pub fn assemble_ipsi_tilde(u: &Field, psi: &Field, p: &StepParams) -> Result<Field> {
    ipsi_tilde_with(u, psi, &p.symbols(u.grid()))
}

fn ua2_with(state: &KgsState, sy: &SchemeSymbols, form: Ua2Form) -> Result<KgsState> {
    let (u, psi) = (&state.u, &state.psi);

    let iu = iu_tilde_with(u, psi, sy, form)?;
    let kick = iu.apply_symbol(&sy.exp_cnabla)?.apply_symbol(&sy.inv_cnabla)?.scaled(-I);
    let u_next = &u.apply_symbol(&sy.exp_cnabla)? + &kick;

    let ipsi = ipsi_tilde_with(u, psi, sy)?;
    let psi_next = &psi.apply_symbol(&sy.exp_half_lap)?
        + &ipsi.apply_symbol(&sy.exp_half_lap)?.scaled(I * re(0.5));

    ensure_finite(KgsState::new(u_next, psi_next)?, 0)
}

/// One step of the second order scheme.
pub fn ua2_step(state: &KgsState, p: &StepParams) -> Result<KgsState> {
    ua2_with(state, &p.symbols(state.grid()), Ua2Form::Standard)
}

/// [`ua2_step`] with an explicit [`Ua2Form`].
pub fn ua2_step_with(state: &KgsState, p: &StepParams, form: Ua2Form) -> Result<KgsState> {
    ua2_with(state, &p.symbols(state.grid()), form)
}

fn limit_with(state: &KgsState, sy: &SchemeSymbols) -> Result<KgsState> {
    // free flows of the limit system, keeping the e^{i tau c^2} phase on the
    // twisted variable so both components stay modulus-one multipliers
    let u_next = state.u.apply_symbol(&sy.exp_limit_u)?;
    let psi_next = state.psi.apply_symbol(&sy.exp_half_lap)?;
    KgsState::new(u_next, psi_next)
}

/// One step of the asymptotic (`c -> infinity`) limit flow:
/// `u <- e^{i tau c^2} e^{-i tau Delta/2} u`, `psi <- e^{i tau Delta/2} psi`.
pub fn limit_free_step(state: &KgsState, p: &StepParams) -> Result<KgsState> {
    limit_with(state, &p.symbols(state.grid()))
}

fn splitting_with(state: &KgsState, sy: &SchemeSymbols) -> Result<KgsState> {
    let tau = sy.tau;
    // sub-flow order is fixed: (1) exact linear flow on both components,
    // (2) frozen nonlinear kick on u using |psi|^2 of the post-linear psi,
    // (3) exact pointwise phase flow psi <- e^{i tau z} psi with
    //     z = untwist(u) from the post-linear u
    let u_lin = state.u.apply_symbol(&sy.exp_cnabla)?;
    let psi_lin = state.psi.apply_symbol(&sy.exp_half_lap)?;

    let abs2 = psi_lin.pointwise_product(&psi_lin.conj_field())?;
    let u_next = &u_lin + &abs2.apply_symbol(&sy.inv_cnabla)?.scaled(-I * re(tau));

    let z_phys = untwist(&u_lin).to_physical();
    let psi_phys = psi_lin.to_physical();
    let rotated: Vec<Complex64> = z_phys
        .iter()
        .zip(&psi_phys)
        .map(|(z, p)| Complex64::cis(tau * z.re) * p)
        .collect();
    let psi_next = Field::from_physical(state.grid(), &rotated)?;

    ensure_finite(KgsState::new(u_next, psi_next)?, 0)
}

/// One step of the Lie splitting baseline.
pub fn splitting_step(state: &KgsState, p: &StepParams) -> Result<KgsState> {
    splitting_with(state, &p.symbols(state.grid()))
}

/// Per-step trace record of [`evolve_traced`].
#[derive(Clone, Copy, Debug)]
pub struct TraceRow {
    pub step: usize,
    pub h1_u: f64,
    pub h1_psi: f64,
    /// L2 norm of psi (conserved by the exact flow).
    pub mass_psi: f64,
}

fn step_with(
    scheme: SchemeId,
    state: &KgsState,
    sy: &SchemeSymbols,
    form: Ua2Form,
) -> Result<KgsState> {
    match scheme {
        SchemeId::Ua1 => ua1_with(state, sy),
        SchemeId::Ua2 => ua2_with(state, sy, form),
        SchemeId::LimitFree => limit_with(state, sy),
        SchemeId::LieSplitting => splitting_with(state, sy),
    }
}

fn evolve_impl(
    scheme: SchemeId,
    state: &KgsState,
    p: &StepParams,
    n_steps: usize,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<KgsState> {
    let sy = p.symbols(state.grid());
    let mut current = state.clone();
    if let Some(t) = trace.as_deref_mut() {
        t.push(TraceRow {
            step: 0,
            h1_u: current.u.sobolev_norm(1.0),
            h1_psi: current.psi.sobolev_norm(1.0),
            mass_psi: current.psi.sobolev_norm(0.0),
        });
    }
    for step in 1..=n_steps {
        current = step_with(scheme, &current, &sy, Ua2Form::Standard).map_err(|e| match e {
            Error::BlowUp { .. } => Error::BlowUp { step },
            other => other,
        })?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow {
                step,
                h1_u: current.u.sobolev_norm(1.0),
                h1_psi: current.psi.sobolev_norm(1.0),
                mass_psi: current.psi.sobolev_norm(0.0),
            });
        }
    }
    Ok(current)
}

/// `n_steps`-fold composition of the chosen step.
pub fn evolve(scheme: SchemeId, state: &KgsState, p: &StepParams, n_steps: usize) -> Result<KgsState> {
    evolve_impl(scheme, state, p, n_steps, None)
}

/// [`evolve`] recording per-step H^1 norms and mass.
pub fn evolve_traced(
    scheme: SchemeId,
    state: &KgsState,
    p: &StepParams,
    n_steps: usize,
) -> Result<(KgsState, Vec<TraceRow>)> {
    let mut trace = Vec::with_capacity(n_steps + 1);
    let end = evolve_impl(scheme, state, p, n_steps, Some(&mut trace))?;
    Ok((end, trace))
}
