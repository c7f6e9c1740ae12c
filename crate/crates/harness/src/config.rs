//! Experiment configuration: JSON file and/or CLI flags, flags winning.

use kgs_core::SchemeId;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Fully resolved experiment configuration, echoed into every report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub scheme: SchemeId,
    pub c_list: Vec<f64>,
    pub tau_list: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub t_final: f64,
    pub theta_psi: f64,
    pub theta_z: f64,
    pub seed: u64,
    pub norm_r: f64,
    pub dealias: bool,
    pub out_dir: String,
    /// Run sweep jobs sequentially even when the parallel feature is on.
    #[serde(default)]
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: SchemeId::Ua1,
            c_list: vec![1.0],
            tau_list: dyadic_taus(1.0, 4, 10),
            n: 256,
            dim: 1,
            t_final: 1.0,
            theta_psi: 6.0,
            theta_z: 6.0,
            seed: 42,
            norm_r: 1.0,
            dealias: false,
            out_dir: "out".to_string(),
            sequential: false,
        }
    }
}

/// `tau = T / 2^j` for `j` in `jmin..=jmax`.
pub fn dyadic_taus(t_final: f64, jmin: u32, jmax: u32) -> Vec<f64> {
    (jmin..=jmax).map(|j| t_final / (1u64 << j) as f64).collect()
}

impl RunConfig {
    /// Enforce the structural invariants before a run.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.c_list.is_empty() || self.tau_list.is_empty() {
            return Err(HarnessError::Config("c and tau lists must be non-empty".into()));
        }
        if self.c_list.iter().any(|&c| !c.is_finite() || c <= 0.0) {
            return Err(HarnessError::Config("every c must be positive".into()));
        }
        if !self.t_final.is_finite() || self.t_final <= 0.0 {
            return Err(HarnessError::Config(format!("T must be positive, got {}", self.t_final)));
        }
        if self.norm_r < 0.0 {
            return Err(HarnessError::Config(format!("norm_r must be >= 0, got {}", self.norm_r)));
        }
        for &tau in &self.tau_list {
            if !tau.is_finite() || tau <= 0.0 {
                return Err(HarnessError::Config(format!("tau must be positive, got {tau}")));
            }
            let steps = self.t_final / tau;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                return Err(HarnessError::Config(format!(
                    "T/tau must be an integer: T = {}, tau = {tau} gives {steps} steps",
                    self.t_final
                )));
            }
        }
        Ok(())
    }

    pub fn steps_for(&self, tau: f64) -> usize {
        (self.t_final / tau).round() as usize
    }
}

/// JSON-file layer: every field optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scheme: Option<String>,
    pub c: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    /// "jmin:jmax" dyadic specification, mutually exclusive with `tau`.
    pub tau_dyadic: Option<String>,
    pub n: Option<usize>,
    pub dim: Option<usize>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub theta_psi: Option<f64>,
    pub theta_z: Option<f64>,
    pub seed: Option<u64>,
    pub norm_r: Option<f64>,
    pub dealias: Option<bool>,
    pub out: Option<String>,
    pub sequential: Option<bool>,
}

impl FileConfig {
    pub fn from_path(path: &std::path::Path) -> Result<FileConfig, HarnessError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        serde_json::from_str(&raw).map_err(|e| {
            HarnessError::Config(format!("{}: {e}", path.display()))
        })
    }
}

pub fn parse_scheme(s: &str) -> Result<SchemeId, HarnessError> {
    SchemeId::parse(s).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn parse_dyadic(spec: &str, t_final: f64) -> Result<Vec<f64>, HarnessError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || HarnessError::Config(format!("tau_dyadic must be jmin:jmax, got {spec:?}"));
    if parts.len() != 2 {
        return Err(err());
    }
    let jmin: u32 = parts[0].parse().map_err(|_| err())?;
    let jmax: u32 = parts[1].parse().map_err(|_| err())?;
    if jmin > jmax {
        return Err(err());
    }
    Ok(dyadic_taus(t_final, jmin, jmax))
}

/// Comma-separated float list, e.g. "1,10,100".
pub fn parse_list(spec: &str) -> Result<Vec<f64>, HarnessError> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("bad number {tok:?} in list {spec:?}")))
        })
        .collect()
}

/// Layering: defaults <- JSON file <- explicit flags (flags win).
#[derive(Debug, Default, Clone)]
pub struct FlagOverrides {
    pub scheme: Option<SchemeId>,
    pub c_list: Option<Vec<f64>>,
    pub tau_list: Option<Vec<f64>>,
    pub tau_dyadic: Option<String>,
    pub n: Option<usize>,
    pub dim: Option<usize>,
    pub t_final: Option<f64>,
    pub theta_psi: Option<f64>,
    pub theta_z: Option<f64>,
    pub seed: Option<u64>,
    pub norm_r: Option<f64>,
    pub dealias: Option<bool>,
    pub out_dir: Option<String>,
    pub sequential: Option<bool>,
}

pub fn resolve_config(
    file: Option<FileConfig>,
    flags: FlagOverrides,
) -> Result<RunConfig, HarnessError> {
    let mut cfg = RunConfig::default();
    let mut tau_set = false;

    if let Some(f) = file {
        if let Some(s) = f.scheme {
            cfg.scheme = parse_scheme(&s)?;
        }
        if let Some(c) = f.c {
            cfg.c_list = c;
        }
        if let Some(t) = f.t_final {
            cfg.t_final = t;
        }
        if f.tau.is_some() && f.tau_dyadic.is_some() {
            return Err(HarnessError::Config("tau and tau_dyadic are mutually exclusive".into()));
        }
        if let Some(tau) = f.tau {
            cfg.tau_list = tau;
            tau_set = true;
        }
        if let Some(spec) = f.tau_dyadic {
            cfg.tau_list = parse_dyadic(&spec, cfg.t_final)?;
            tau_set = true;
        }
        if let Some(n) = f.n {
            cfg.n = n;
        }
        if let Some(dim) = f.dim {
            cfg.dim = dim;
        }
        if let Some(v) = f.theta_psi {
            cfg.theta_psi = v;
        }
        if let Some(v) = f.theta_z {
            cfg.theta_z = v;
        }
        if let Some(v) = f.seed {
            cfg.seed = v;
        }
        if let Some(v) = f.norm_r {
            cfg.norm_r = v;
        }
        if let Some(v) = f.dealias {
            cfg.dealias = v;
        }
        if let Some(v) = f.out {
            cfg.out_dir = v;
        }
        if let Some(v) = f.sequential {
            cfg.sequential = v;
        }
    }

    if flags.tau_list.is_some() && flags.tau_dyadic.is_some() {
        return Err(HarnessError::Config("--tau and --tau-dyadic are mutually exclusive".into()));
    }
    if let Some(v) = flags.scheme {
        cfg.scheme = v;
    }
    if let Some(v) = flags.c_list {
        cfg.c_list = v;
    }
    if let Some(v) = flags.t_final {
        cfg.t_final = v;
        // a dyadic tau list tracks T unless overridden explicitly
        if !tau_set && flags.tau_list.is_none() && flags.tau_dyadic.is_none() {
            cfg.tau_list = dyadic_taus(cfg.t_final, 4, 10);
        }
    }
    if let Some(v) = flags.tau_list {
        cfg.tau_list = v;
    }
    if let Some(spec) = &flags.tau_dyadic {
        cfg.tau_list = parse_dyadic(spec, cfg.t_final)?;
    }
    if let Some(v) = flags.n {
        cfg.n = v;
    }
    if let Some(v) = flags.dim {
        cfg.dim = v;
    }
    if let Some(v) = flags.theta_psi {
        cfg.theta_psi = v;
    }
    if let Some(v) = flags.theta_z {
        cfg.theta_z = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.norm_r {
        cfg.norm_r = v;
    }
    if let Some(v) = flags.dealias {
        cfg.dealias = v;
    }
    if let Some(v) = flags.out_dir {
        cfg.out_dir = v;
    }
    if let Some(v) = flags.sequential {
        cfg.sequential = v;
    }

    cfg.validate()?;
    Ok(cfg)
}
