//! Convergence report: rows, fitted slopes, CSV/JSON persistence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::slopes::log_log_fit;
use crate::HarnessError;

pub const CSV_HEADER: &str = "scheme,c,tau,err_u_h1,err_psi_h1,runtime_ms,diverged";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scheme: String,
    pub c: f64,
    pub tau: f64,
    pub err_u_h1: f64,
    pub err_psi_h1: f64,
    pub runtime_ms: f64,
    pub diverged: bool,
}

impl ConvergenceRow {
    /// Combined error metric used for slope fits and plots.
    pub fn err_sum(&self) -> f64 {
        self.err_u_h1 + self.err_psi_h1
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeFit {
    pub scheme: String,
    pub c: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
}

/// Agreement record between the self-reference and the classical reference.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certification {
    pub c: f64,
    pub n_fine: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportMeta {
    pub config: RunConfig,
    pub reference: String,
    pub build: String,
    /// Estimated reference error per c (from one extra reference at 2*tau_ref).
    pub error_floors: Vec<(f64, f64)>,
    pub certifications: Vec<Certification>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<SlopeFit>,
    pub meta: ReportMeta,
}

impl ConvergenceReport {
    /// Fit per-(scheme, c) slopes over non-diverged rows whose combined error
    /// clears 1000x the reference error floor.
    pub fn fit_slopes(rows: &[ConvergenceRow], floors: &[(f64, f64)]) -> Vec<SlopeFit> {
        let mut keys: Vec<(String, f64)> = Vec::new();
        for row in rows {
            let key = (row.scheme.clone(), row.c);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut fits = Vec::new();
        for (scheme, c) in keys {
            let floor = floors
                .iter()
                .find(|(fc, _)| *fc == c)
                .map(|(_, f)| *f)
                .unwrap_or(0.0);
            let mut taus = Vec::new();
            let mut errs = Vec::new();
            for row in rows.iter().filter(|r| r.scheme == scheme && r.c == c) {
                if !row.diverged && row.err_sum() > 1e3 * floor {
                    taus.push(row.tau);
                    errs.push(row.err_sum());
                }
            }
            if let Some((slope, intercept)) = log_log_fit(&taus, &errs) {
                fits.push(SlopeFit { scheme: scheme.clone(), c, slope, intercept, points_used: taus.len() });
            }
        }
        fits
    }

    pub fn fit_for(&self, scheme: &str, c: f64) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.scheme == scheme && f.c == c)
    }
}

pub fn atomic_write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io_err =
        |e: std::io::Error| HarnessError::Io { path: path.display().to_string(), reason: e.to_string() };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(contents.as_bytes()).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Render rows as CSV with the fixed schema. Floats use shortest
/// round-trip formatting, so parsing the file recovers them exactly.
pub fn render_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scheme, r.c, r.tau, r.err_u_h1, r.err_psi_h1, r.runtime_ms, r.diverged
        ));
    }
    out
}

pub fn emit_csv(report: &ConvergenceReport, path: &Path) -> Result<(), HarnessError> {
    atomic_write(path, &render_csv(&report.rows))
}

pub fn parse_csv(text: &str) -> Result<Vec<ConvergenceRow>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Config(format!("bad CSV header: {other:?}")));
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(HarnessError::Config(format!("line {}: expected 7 columns", idx + 2)));
        }
        let num = |s: &str| -> Result<f64, HarnessError> {
            s.parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("line {}: bad number {s:?}", idx + 2)))
        };
        rows.push(ConvergenceRow {
            scheme: cols[0].to_string(),
            c: num(cols[1])?,
            tau: num(cols[2])?,
            err_u_h1: num(cols[3])?,
            err_psi_h1: num(cols[4])?,
            runtime_ms: num(cols[5])?,
            diverged: cols[6] == "true",
        });
    }
    Ok(rows)
}

pub fn emit_json<T: Serialize>(value: &T, path: &Path) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    atomic_write(path, &text)
}

pub fn build_id() -> String {
    format!("kgs-harness/{}", env!("CARGO_PKG_VERSION"))
}
