//! Global-error convergence studies over `(c, tau)` sweeps.
//!
//! Reference strategy is dual-path: every `(c, theta)` series is measured
//! against a self-reference (the second order scheme at `tau_ref =
//! min(tau)/16`), and for `c <= 16` that self-reference is additionally
//! certified against the classical Lawson-RK4 integrator. An error floor per
//! `c` is estimated from one extra self-reference at `2 tau_ref`; slope fits
//! ignore rows whose error does not clear 1000x that floor, so the reference
//! accuracy never contaminates a fitted order.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use kgs_core::parallel::slice_map;
use kgs_core::{evolve, make_state, resolved_reference, CParam, Grid, KgsState, SchemeId, StepParams};

use crate::config::RunConfig;
use crate::report::{
    build_id, emit_csv, emit_json, Certification, ConvergenceReport, ConvergenceRow, ReportMeta,
};
use crate::svg::emit_svg;
use crate::Result;

struct ReferenceBundle {
    c: f64,
    state0: KgsState,
    reference: KgsState,
    /// Estimated reference error (self-difference against 2*tau_ref, over 3).
    floor: f64,
    certification: Option<Certification>,
}

fn build_reference(cfg: &RunConfig, grid: &Arc<Grid>, c: f64) -> Result<ReferenceBundle> {
    let cp = CParam::new(c)?;
    let state0 = make_state(grid, cp, cfg.theta_psi, cfg.theta_z, cfg.seed)?;
    let tau_min = cfg.tau_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let tau_ref = tau_min / 16.0;
    let steps = (cfg.t_final / tau_ref).round() as usize;
    let reference = evolve(SchemeId::Ua2, &state0, &StepParams::new(cp, tau_ref)?, steps)?;
    let coarse = evolve(SchemeId::Ua2, &state0, &StepParams::new(cp, 2.0 * tau_ref)?, steps / 2)?;
    let floor = reference.distance(&coarse, cfg.norm_r) / 3.0;

    let certification = if c <= 16.0 {
        // resolve the fastest phase to ~6e-3 rad per step so the classical
        // reference error sits far below the self-reference floor
        let n_fine = (16.0 * (c * c * cfg.t_final / 0.1).ceil()).max(4096.0) as usize;
        let resolved = resolved_reference(&state0, cp, cfg.t_final, n_fine)?;
        Some(Certification { c, n_fine, delta: reference.distance(&resolved, cfg.norm_r) })
    } else {
        None
    };

    Ok(ReferenceBundle { c, state0, reference, floor, certification })
}

fn measure_row(
    cfg: &RunConfig,
    scheme: SchemeId,
    bundle: &ReferenceBundle,
    tau: f64,
) -> Result<ConvergenceRow> {
    let cp = CParam::new(bundle.c)?;
    let p = StepParams::new(cp, tau)?;
    let steps = cfg.steps_for(tau);
    let start = Instant::now();
    let outcome = evolve(scheme, &bundle.state0, &p, steps);
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let row = match outcome {
        Ok(end) => ConvergenceRow {
            scheme: scheme.name().to_string(),
            c: bundle.c,
            tau,
            err_u_h1: (&end.u - &bundle.reference.u).sobolev_norm(cfg.norm_r),
            err_psi_h1: (&end.psi - &bundle.reference.psi).sobolev_norm(cfg.norm_r),
            runtime_ms,
            diverged: false,
        },
        Err(kgs_core::Error::BlowUp { .. }) => ConvergenceRow {
            scheme: scheme.name().to_string(),
            c: bundle.c,
            tau,
            err_u_h1: f64::NAN,
            err_psi_h1: f64::NAN,
            runtime_ms,
            diverged: true,
        },
        Err(other) => return Err(other.into()),
    };
    Ok(row)
}

/// Run the sweep for several schemes sharing one reference solution per `c`.
pub fn run_convergence_multi(
    cfg: &RunConfig,
    schemes: &[SchemeId],
) -> Result<Vec<ConvergenceReport>> {
    cfg.validate()?;
    let grid = Grid::with_options(cfg.dim, cfg.n, 2.0 * std::f64::consts::PI, cfg.dealias)?;
    let parallel = !cfg.sequential;

    let bundles: Vec<Result<ReferenceBundle>> =
        slice_map(&cfg.c_list, parallel, |&c| build_reference(cfg, &grid, c));
    let bundles: Vec<ReferenceBundle> = bundles.into_iter().collect::<Result<_>>()?;

    let floors: Vec<(f64, f64)> = bundles.iter().map(|b| (b.c, b.floor)).collect();
    let certifications: Vec<Certification> =
        bundles.iter().filter_map(|b| b.certification.clone()).collect();

    let mut reports = Vec::new();
    for &scheme in schemes {
        let jobs: Vec<(usize, f64)> = bundles
            .iter()
            .enumerate()
            .flat_map(|(bi, _)| cfg.tau_list.iter().map(move |&tau| (bi, tau)))
            .collect();
        let rows: Vec<Result<ConvergenceRow>> = slice_map(&jobs, parallel, |&(bi, tau)| {
            measure_row(cfg, scheme, &bundles[bi], tau)
        });
        let rows: Vec<ConvergenceRow> = rows.into_iter().collect::<Result<_>>()?;
        let fits = ConvergenceReport::fit_slopes(&rows, &floors);
        let mut scheme_cfg = cfg.clone();
        scheme_cfg.scheme = scheme;
        let report = ConvergenceReport {
            rows,
            fits,
            meta: ReportMeta {
                config: scheme_cfg,
                reference: format!(
                    "ua2 self-reference at tau_ref = min(tau)/16 = {:.3e}; certified against \
                     Lawson-RK4 for c <= 16",
                    cfg.tau_list.iter().cloned().fold(f64::INFINITY, f64::min) / 16.0
                ),
                build: build_id(),
                error_floors: floors.clone(),
                certifications: certifications.clone(),
            },
        };
        reports.push(report);
    }
    Ok(reports)
}

/// Full study for the configured scheme: sweep, slope fits, CSV + SVG + JSON
/// written under the output directory.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let report = run_convergence_multi(cfg, &[cfg.scheme])?.pop().expect("one scheme");
    let base = PathBuf::from(&cfg.out_dir);
    let stem = format!("convergence_{}", cfg.scheme.name());
    emit_csv(&report, &base.join(format!("{stem}.csv")))?;
    emit_svg(&report, &base.join(format!("{stem}.svg")))?;
    emit_json(&report, &base.join(format!("{stem}.json")))?;
    Ok(report)
}

