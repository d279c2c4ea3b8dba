//! JSON run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use harvestdiff_core::coeff::{parse, CoefficientSet};
use harvestdiff_core::grid::Grid;
use harvestdiff_core::stepper::{ModelParams, SolverSettings};
use harvestdiff_core::trajectory::TimePlan;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    33
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: default_n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "one")]
    pub d1: f64,
    #[serde(default = "one")]
    pub d2: f64,
    pub mu: f64,
    pub nu: f64,
}

fn one() -> f64 {
    1.0
}

impl From<ParamsConfig> for ModelParams {
    fn from(p: ParamsConfig) -> Self {
        ModelParams {
            d1: p.d1,
            d2: p.d2,
            mu: p.mu,
            nu: p.nu,
        }
    }
}

/// Expression strings for K, r and the initial densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub k: String,
    pub r: String,
    pub u0: String,
    pub v0: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default = "yes")]
    pub dt_guard: bool,
}

fn default_rel_tol() -> f64 {
    SolverSettings::default().rel_tol
}

fn yes() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            rel_tol: s.rel_tol,
            max_iters: s.max_iters,
            dt_guard: s.dt_guard,
        }
    }
}

impl From<SolverConfig> for SolverSettings {
    fn from(s: SolverConfig) -> Self {
        SolverSettings {
            rel_tol: s.rel_tol,
            max_iters: s.max_iters,
            dt_guard: s.dt_guard,
        }
    }
}

/// A complete simulation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub params: ParamsConfig,
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Source of each value (`paper` or `inferred: ...`), keyed by field path.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
}

/// One failed check, tagged with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config: {}", join(.0))]
    Invalid(Vec<FieldError>),
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

impl ConfigError {
    pub fn fields(&self) -> Vec<&'static str> {
        match self {
            ConfigError::Invalid(errs) => errs.iter().map(|e| e.field).collect(),
            _ => Vec::new(),
        }
    }
}

impl SimConfig {
    /// Every invariant violation, in field order.
    pub fn problems(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        let mut bad = |field, message: String| out.push(FieldError { field, message });

        if self.grid.n < 3 {
            bad("grid.n", format!("needs at least 3 points, got {}", self.grid.n));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            bad("time.dt", format!("must be positive, got {}", t.dt));
        }
        if !(t.t_end.is_finite() && t.t_end >= t.dt) {
            bad("time.t_end", format!("must be at least dt, got {}", t.t_end));
        }
        if t.record_every < 1 {
            bad("time.record_every", "must be at least 1".to_string());
        }
        if let Some(s) = t.snapshot_times.iter().find(|&&s| !(0.0..=t.t_end).contains(&s)) {
            bad("time.snapshot_times", format!("{s} lies outside [0, t_end]"));
        }

        let p = &self.params;
        for (field, value, positive) in [
            ("params.d1", p.d1, true),
            ("params.d2", p.d2, true),
            ("params.mu", p.mu, false),
            ("params.nu", p.nu, false),
        ] {
            let ok = value.is_finite() && if positive { value > 0.0 } else { value >= 0.0 };
            if !ok {
                let need = if positive { "positive" } else { "non-negative" };
                bad(field, format!("must be {need}, got {value}"));
            }
        }

        let c = &self.coefficients;
        for (field, src) in [
            ("coefficients.k", &c.k),
            ("coefficients.r", &c.r),
            ("coefficients.u0", &c.u0),
            ("coefficients.v0", &c.v0),
        ] {
            if let Err(e) = parse(src) {
                bad(field, format!("{e} in {src:?}"));
            }
        }

        if let Err(msg) = SolverSettings::from(self.solver).validate() {
            bad("solver", msg);
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid.n).expect("validated grid size")
    }

    pub fn model_params(&self) -> ModelParams {
        self.params.into()
    }

    pub fn solver_settings(&self) -> SolverSettings {
        self.solver.into()
    }

    pub fn coefficient_set(&self) -> CoefficientSet {
        let c = &self.coefficients;
        CoefficientSet::parse(&c.k, &c.r, &c.u0, &c.v0).expect("validated expressions")
    }

    pub fn time_plan(&self) -> TimePlan {
        TimePlan::new(self.time.dt, self.time.t_end)
            .recording_every(self.time.record_every)
            .with_snapshots(self.time.snapshot_times.clone())
    }

    /// Copy with a different harvesting pair.
    pub fn with_harvesting(&self, mu: f64, nu: f64) -> Self {
        let mut c = self.clone();
        c.params.mu = mu;
        c.params.nu = nu;
        c
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = SimConfig::from_json(&text).map_err(|source| ConfigError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    config.validate()?;
    Ok(config)
}
