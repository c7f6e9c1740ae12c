//! Asymptotic-consistency study: one-step deviation from the limit free flow
//! as a function of `c`, plus the symbol-level expansion bound.

use std::path::PathBuf;
use std::sync::Arc;

use kgs_core::parallel::slice_map;
use kgs_core::{
    limit_free_step, make_state, ua1_step, ua2_step, BaseKind, CParam, Grid, SchemeId, StepParams,
    Symbol,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::report::{atomic_write, build_id, emit_json};
use crate::slopes::log_log_fit;
use crate::{HarnessError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeviationRow {
    pub scheme: String,
    pub component: String,
    pub c: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeviationFit {
    pub scheme: String,
    pub component: String,
    pub slope: f64,
    pub intercept: f64,
}

/// `max_k |c sqrt(c^2+k^2) - c^2 - k^2/2| / (c^{-2} (1+k^2)^2)`; tends to 1/8
/// from below as `c` grows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolCheckRow {
    pub c: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub config: RunConfig,
    pub tau: f64,
    pub rows: Vec<DeviationRow>,
    pub fits: Vec<DeviationFit>,
    pub symbol_checks: Vec<SymbolCheckRow>,
    pub build: String,
}

impl ConsistencyReport {
    pub fn fit_for(&self, scheme: &str, component: &str) -> Option<&DeviationFit> {
        self.fits.iter().find(|f| f.scheme == scheme && f.component == component)
    }
}

fn deviation_rows(cfg: &RunConfig, grid: &Arc<Grid>, c: f64, tau: f64) -> Result<Vec<DeviationRow>> {
    let cp = CParam::new(c)?;
    let p = StepParams::new(cp, tau)?;
    let state = make_state(grid, cp, cfg.theta_psi, cfg.theta_z, cfg.seed)?;
    let limit = limit_free_step(&state, &p)?;
    let mut rows = Vec::new();
    for (scheme, stepped) in [
        (SchemeId::Ua1, ua1_step(&state, &p)?),
        (SchemeId::Ua2, ua2_step(&state, &p)?),
    ] {
        rows.push(DeviationRow {
            scheme: scheme.name().to_string(),
            component: "u".into(),
            c,
            deviation: (&stepped.u - &limit.u).sobolev_norm(cfg.norm_r),
        });
        rows.push(DeviationRow {
            scheme: scheme.name().to_string(),
            component: "psi".into(),
            c,
            deviation: (&stepped.psi - &limit.psi).sobolev_norm(cfg.norm_r),
        });
    }
    Ok(rows)
}

/// Deviation-from-limit sweep at fixed `tau = tau_list[0]`, slopes of
/// `log D` against `log c`, and the symbol-level expansion check.
pub fn run_consistency(cfg: &RunConfig) -> Result<ConsistencyReport> {
    cfg.validate()?;
    let cmin = cfg.c_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let cmax = cfg.c_list.iter().cloned().fold(0.0f64, f64::max);
    if cmax / cmin < 1e3 {
        return Err(HarnessError::Config(format!(
            "consistency study needs c values spanning at least 3 decades, got [{cmin}, {cmax}]"
        )));
    }
    let grid = Grid::with_options(cfg.dim, cfg.n, 2.0 * std::f64::consts::PI, cfg.dealias)?;
    let tau = cfg.tau_list[0];

    let per_c: Vec<Result<Vec<DeviationRow>>> =
        slice_map(&cfg.c_list, !cfg.sequential, |&c| deviation_rows(cfg, &grid, c, tau));
    let mut rows = Vec::new();
    for chunk in per_c {
        rows.extend(chunk?);
    }

    let mut fits = Vec::new();
    for scheme in ["ua1", "ua2"] {
        for component in ["u", "psi"] {
            let cs: Vec<f64> = rows
                .iter()
                .filter(|r| r.scheme == scheme && r.component == component)
                .map(|r| r.c)
                .collect();
            let ds: Vec<f64> = rows
                .iter()
                .filter(|r| r.scheme == scheme && r.component == component)
                .map(|r| r.deviation)
                .collect();
            if let Some((slope, intercept)) = log_log_fit(&cs, &ds) {
                fits.push(DeviationFit {
                    scheme: scheme.into(),
                    component: component.into(),
                    slope,
                    intercept,
                });
            }
        }
    }

    let symbol_checks = cfg
        .c_list
        .iter()
        .map(|&c| {
            let cp = CParam::new(c)?;
            let residual = Symbol::base(BaseKind::Residual, &grid, cp);
            let max_ratio = grid
                .k_squared()
                .iter()
                .zip(residual.values())
                .map(|(&k2, r)| r.re.abs() * c * c / ((1.0 + k2) * (1.0 + k2)))
                .fold(0.0f64, f64::max);
            Ok(SymbolCheckRow { c, max_ratio })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = ConsistencyReport {
        config: cfg.clone(),
        tau,
        rows,
        fits,
        symbol_checks,
        build: build_id(),
    };

    let base = PathBuf::from(&cfg.out_dir);
    emit_json(&report, &base.join("consistency.json"))?;
    let mut csv = String::from("scheme,component,c,deviation\n");
    for r in &report.rows {
        csv.push_str(&format!("{},{},{},{}\n", r.scheme, r.component, r.c, r.deviation));
    }
    atomic_write(&base.join("consistency.csv"), &csv)?;
    Ok(report)
}
