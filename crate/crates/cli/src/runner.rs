//! Simulation driver plus the regime, eigenvalue and sweep analyses.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use harvestdiff_core::analysis::{
    classify_regime, compute_thresholds, detect_outcome, invasion_eigenvalue, steady_state_single, AnalysisError,
    EigenPair, LinearizationPoint, Regime, RegimeReport, Thresholds, DEFAULT_EXTINCT_TOL, DEFAULT_WINDOW,
};
use harvestdiff_core::coeff::{CoefficientError, Species};
use harvestdiff_core::stepper::{HarvestingModel, ModelParams, State, Stepper};
use harvestdiff_core::trajectory::{simulate, SimulationError, Trajectory};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::output::{snapshot_file_name, write_energy_csv, write_snapshot};

/// Update-rate tolerance used for steady states inside the CLI analyses.
pub const STEADY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial data: {0}")]
    Initial(#[from] CoefficientError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

/// Integrates the configured system without writing anything.
pub fn simulate_config(config: &SimConfig) -> Result<Trajectory, RunError> {
    config.validate()?;
    let grid = config.grid();
    let coeffs = config.coefficient_set();
    let initial = State::initial(&coeffs, grid)?;
    let mut stepper = Stepper::new(
        HarvestingModel::new(grid, &coeffs, config.model_params()),
        config.solver_settings(),
    );
    log::info!(
        "simulating n={} dt={} t_end={} mu={} nu={}",
        config.grid.n,
        config.time.dt,
        config.time.t_end,
        config.params.mu,
        config.params.nu
    );
    Ok(simulate(&mut stepper, initial, &config.time_plan())?)
}

/// `energy.csv` plus two files per snapshot.
pub fn write_outputs(traj: &Trajectory, dir: &Path) -> Result<(), RunError> {
    let wrap = |path: PathBuf| move |source| RunError::Output { path, source };
    fs::create_dir_all(dir).map_err(wrap(dir.to_path_buf()))?;
    let energy = dir.join("energy.csv");
    write_energy_csv(traj, &energy).map_err(wrap(energy.clone()))?;
    for index in 0..traj.snapshots.len() {
        for species in [Species::U, Species::V] {
            let path = dir.join(snapshot_file_name(index, species));
            write_snapshot(traj, index, species, &path).map_err(wrap(path.clone()))?;
        }
    }
    Ok(())
}

/// Simulates and, when an output directory is configured, writes the results.
pub fn run(config: &SimConfig) -> Result<Trajectory, RunError> {
    let traj = simulate_config(config)?;
    if let Some(dir) = &config.output.dir {
        write_outputs(&traj, dir)?;
        log::info!("wrote {}", dir.display());
    }
    Ok(traj)
}

/// Thresholds for a stationary configuration; `None` when K or r depends on time.
pub fn thresholds_for(config: &SimConfig) -> Result<Option<Thresholds>, RunError> {
    config.validate()?;
    let coeffs = config.coefficient_set();
    if !coeffs.is_stationary() {
        return Ok(None);
    }
    Ok(Some(compute_thresholds(
        config.grid(),
        &coeffs,
        &config.model_params(),
        STEADY_TOL,
    )?))
}

/// Prediction for `(mu, nu)`, refined by thresholds when a stationary
/// configuration is given, and an observation when `simulate` is set.
pub fn regime_report(mu: f64, nu: f64, config: Option<&SimConfig>, simulate: bool) -> Result<RegimeReport, RunError> {
    let config = config.map(|c| c.with_harvesting(mu, nu));
    let thresholds = match &config {
        Some(c) => thresholds_for(c)?.unwrap_or_default(),
        None => Thresholds::default(),
    };
    let params = config
        .as_ref()
        .map_or(ModelParams::unit_diffusion(mu, nu), |c| c.model_params());
    let predicted = classify_regime(&params, Some(&thresholds));
    let observed = match (&config, simulate) {
        (Some(c), true) => detect_outcome(&simulate_config(c)?, DEFAULT_EXTINCT_TOL, DEFAULT_WINDOW),
        _ => Regime::Undetermined,
    };
    Ok(RegimeReport {
        predicted,
        observed,
        thresholds,
    })
}

/// Principal eigenpair of the linearization at `point`.
pub fn eigen_at(config: &SimConfig, point: LinearizationPoint) -> Result<EigenPair, RunError> {
    config.validate()?;
    let grid = config.grid();
    let coeffs = config.coefficient_set();
    let params = config.model_params();
    let resident = match point.resident() {
        Some(species) => Some(steady_state_single(species, grid, &coeffs, &params, STEADY_TOL)?),
        None => None,
    };
    Ok(invasion_eigenvalue(point, resident.as_ref(), grid, &coeffs, &params)?)
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub nu: f64,
    pub predicted: Regime,
    pub observed: Regime,
    pub energy_u: f64,
    pub energy_v: f64,
}

pub const SWEEP_HEADER: &str = "mu,nu,predicted,observed,energy_u,energy_v";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.16e},{:.16e}",
            self.mu, self.nu, self.predicted, self.observed, self.energy_u, self.energy_v
        )
    }
}

fn sweep_one(base: &SimConfig, mu: f64, nu: f64) -> Result<SweepRow, RunError> {
    let mut config = base.with_harvesting(mu, nu);
    if let Some(dir) = &base.output.dir {
        config.output.dir = Some(dir.join(format!("mu_{mu}_nu_{nu}")));
    }
    let thresholds = thresholds_for(&config)?;
    let predicted = classify_regime(&config.model_params(), thresholds.as_ref());
    let traj = run(&config)?;
    let last = traj.last();
    Ok(SweepRow {
        mu,
        nu,
        predicted,
        observed: detect_outcome(&traj, DEFAULT_EXTINCT_TOL, DEFAULT_WINDOW),
        energy_u: last.energy_u,
        energy_v: last.energy_v,
    })
}

/// Runs every `(mu, nu)` combination in parallel. Rows come back in
/// `mus`-major order regardless of scheduling.
pub fn sweep(base: &SimConfig, mus: &[f64], nus: &[f64]) -> Result<Vec<SweepRow>, RunError> {
    base.validate()?;
    let pairs: Vec<(f64, f64)> = mus.iter().flat_map(|&m| nus.iter().map(move |&n| (m, n))).collect();
    pairs.par_iter().map(|&(mu, nu)| sweep_one(base, mu, nu)).collect()
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}
