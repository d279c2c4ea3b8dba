//! Steady states, principal eigenvalues, invasion thresholds and regime
//! classification.
//!
//! All eigenvalue problems involve operators of the form `A = d·L + diag(q)`
//! with `L` the Neumann Laplacian. `A` is self-adjoint in the
//! quadrature-weighted inner product, so its largest eigenvalue is found by
//! power iteration on `A + sI` with a shift `s` that makes the spectrum
//! non-negative. Eigenfunctions are normalized so that `∫ψ² = 1`.

use std::fmt;

use thiserror::Error;

use crate::coeff::{CoefficientError, CoefficientSet, Species};
use crate::grid::{apply_laplacian, dirichlet_energy, integrate, laplacian_neumann, Grid, ScalarField};
use crate::stepper::{HarvestingModel, ModelParams, SolverSettings, State, StepError, Stepper};
use crate::trajectory::Trajectory;

/// Default energy threshold below which a species counts as extinct.
pub const DEFAULT_EXTINCT_TOL: f64 = 1e-8;
/// Default number of trailing records inspected by [`detect_outcome`].
pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("steady-state and eigenvalue analysis needs time-independent K and r")]
    TimeDependent,
    #[error("steady state of {species} did not settle within {steps} steps (update rate {rate:.3e})")]
    SteadyStateNotConverged { species: Species, steps: usize, rate: f64 },
    #[error("power iteration did not converge within {iterations} iterations (residual {residual:.3e})")]
    EigenNotConverged { iterations: usize, residual: f64 },
    #[error("degenerate threshold denominator ∫rΨ² = {0:e}")]
    DegenerateDenominator(f64),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
}

/// Single-species equilibrium `u*` (or `v*`) with the other species absent.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub field: ScalarField,
    pub species: Species,
    /// Sup norm of the discrete elliptic residual.
    pub residual: f64,
    pub iterations: usize,
    /// Harvesting at or above the growth rate: only the zero state remains.
    pub trivial: bool,
}

fn require_stationary(coeffs: &CoefficientSet) -> Result<(), AnalysisError> {
    if coeffs.is_stationary() {
        Ok(())
    } else {
        Err(AnalysisError::TimeDependent)
    }
}

/// Sup norm of `d·Lw + r·w·(1 − h − w/K)`.
pub fn elliptic_residual(
    field: &ScalarField,
    diffusion: f64,
    harvest: f64,
    k: &ScalarField,
    r: &ScalarField,
) -> f64 {
    let lw = laplacian_neumann(field);
    let w = field.values();
    (0..w.len())
        .map(|i| {
            let react = r.values()[i] * w[i] * (1.0 - harvest - w[i] / k.values()[i]);
            (diffusion * lw.values()[i] + react).abs()
        })
        .fold(0.0, f64::max)
}

const STEADY_STATE_BUDGET: usize = 200_000;

/// Marches the single-species problem to equilibrium, starting from the
/// reduced capacity `(1−h)K`, until `‖w⁺ − w‖∞ / Δt < tol`.
pub fn steady_state_single(
    species: Species,
    grid: Grid,
    coeffs: &CoefficientSet,
    params: &ModelParams,
    tol: f64,
) -> Result<SteadyState, AnalysisError> {
    require_stationary(coeffs)?;
    params.validate()?;
    let harvest = params.harvesting(species);
    let k = coeffs.sample_capacity(grid, 0.0)?;
    let r = coeffs.sample_growth(grid, 0.0)?;
    if harvest >= 1.0 {
        return Ok(SteadyState {
            field: ScalarField::zeros(grid),
            species,
            residual: 0.0,
            iterations: 0,
            trivial: true,
        });
    }

    let rate = r.max() * (1.0 - harvest);
    let dt = if rate > 0.0 { (0.5 / rate).min(1.0) } else { 1.0 };
    let guess = k.map(|v| (1.0 - harvest) * v);
    let zero = ScalarField::zeros(grid);
    let mut state = match species {
        Species::U => State::new(guess, zero, 0.0),
        Species::V => State::new(zero, guess, 0.0),
    };
    let mut stepper = Stepper::new(
        HarvestingModel::new(grid, coeffs, *params),
        SolverSettings::with_tolerance(1e-13),
    );
    let mut update = f64::INFINITY;
    for step in 1..=STEADY_STATE_BUDGET {
        let next = stepper.step(&state, dt)?;
        update = next.field(species).max_abs_diff(state.field(species)) / dt;
        state = next;
        if update < tol {
            let field = state.field(species).clone();
            let residual = elliptic_residual(&field, params.diffusion(species), harvest, &k, &r);
            return Ok(SteadyState {
                field,
                species,
                residual,
                iterations: step,
                trivial: false,
            });
        }
    }
    Err(AnalysisError::SteadyStateNotConverged {
        species,
        steps: STEADY_STATE_BUDGET,
        rate: update,
    })
}

/// Both sides of `∫ r·K_h > ∫ r·w*` with `K_h = (1−h)K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// False when K is constant, where equality is expected instead.
    pub applicable: bool,
}

pub fn check_k_inequality(
    ss: &SteadyState,
    coeffs: &CoefficientSet,
    params: &ModelParams,
) -> Result<KInequality, AnalysisError> {
    require_stationary(coeffs)?;
    let grid = ss.field.grid();
    let harvest = params.harvesting(ss.species);
    let k = coeffs.sample_capacity(grid, 0.0)?;
    let r = coeffs.sample_growth(grid, 0.0)?;
    let lhs = integrate(&r.zip_map(&k, |r, k| r * (1.0 - harvest) * k));
    let rhs = integrate(&r.zip_map(&ss.field, |r, w| r * w));
    let applicable = k.max() - k.min() > 1e-12 * k.max_abs();
    Ok(KInequality {
        lhs,
        rhs,
        holds: applicable && lhs > rhs,
        applicable,
    })
}

/// Principal eigenpair of `d·L + diag(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub eigenfunction: ScalarField,
    /// `‖Aψ − λψ‖` in the weighted L² norm.
    pub residual: f64,
    pub iterations: usize,
}

const EIGEN_RESIDUAL_TARGET: f64 = 1e-9;
const EIGEN_RAYLEIGH_TOL: f64 = 1e-10;
const EIGEN_BUDGET: usize = 2_000_000;

fn apply_operator(grid: Grid, d: f64, q: &[f64], psi: &[f64], out: &mut [f64]) {
    apply_laplacian(grid, psi, out);
    for k in 0..out.len() {
        out[k] = d * out[k] + q[k] * psi[k];
    }
}

/// Largest eigenvalue of `d·L + diag(q)` by shifted power iteration.
pub fn principal_eigenvalue(d: f64, potential: &ScalarField) -> Result<EigenPair, AnalysisError> {
    let grid = potential.grid();
    let weights = grid.quadrature();
    let h = grid.spacing();
    let q = potential.values();
    let shift = potential.min().abs() + d * 8.0 / (h * h);
    let norm = |v: &[f64]| weights.inner(v, v).sqrt();

    let mut psi = vec![1.0; grid.len()];
    let n0 = norm(&psi);
    psi.iter_mut().for_each(|v| *v /= n0);
    let mut apsi = vec![0.0; grid.len()];
    let mut lambda_prev = f64::NAN;
    let mut residual = f64::INFINITY;

    for iter in 0..EIGEN_BUDGET {
        apply_operator(grid, d, q, &psi, &mut apsi);
        let lambda = weights.inner(&psi, &apsi);
        let defect: Vec<f64> = apsi.iter().zip(&psi).map(|(a, p)| a - lambda * p).collect();
        residual = norm(&defect);
        let settled = (lambda - lambda_prev).abs() <= EIGEN_RAYLEIGH_TOL * lambda.abs().max(1.0);
        if residual <= EIGEN_RESIDUAL_TARGET && settled {
            let mut eigenfunction = ScalarField::from_values(grid, psi).expect("finite iterate");
            if eigenfunction.values().iter().sum::<f64>() < 0.0 {
                eigenfunction = eigenfunction.map(|v| -v);
            }
            return Ok(EigenPair {
                lambda,
                eigenfunction,
                residual,
                iterations: iter,
            });
        }
        lambda_prev = lambda;
        for (p, a) in psi.iter_mut().zip(&apsi) {
            *p = a + shift * *p;
        }
        let nrm = norm(&psi);
        psi.iter_mut().for_each(|v| *v /= nrm);
    }
    Err(AnalysisError::EigenNotConverged {
        iterations: EIGEN_BUDGET,
        residual,
    })
}

/// State around which the system is linearized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearizationPoint {
    /// `(0, 0)`, growth of the given species from low density.
    Trivial(Species),
    /// `(u*, 0)`, invasion by `v`.
    UStar,
    /// `(0, v*)`, invasion by `u`.
    VStar,
}

impl LinearizationPoint {
    /// Species whose growth rate the eigenvalue measures.
    pub fn invader(self) -> Species {
        match self {
            LinearizationPoint::Trivial(s) => s,
            LinearizationPoint::UStar => Species::V,
            LinearizationPoint::VStar => Species::U,
        }
    }

    /// Species that must be at its steady state, if any.
    pub fn resident(self) -> Option<Species> {
        match self {
            LinearizationPoint::Trivial(_) => None,
            LinearizationPoint::UStar => Some(Species::U),
            LinearizationPoint::VStar => Some(Species::V),
        }
    }
}

/// Potential `q = (1−h)·r` of the invader linearized at the trivial state.
pub fn trivial_potential(
    species: Species,
    grid: Grid,
    coeffs: &CoefficientSet,
    params: &ModelParams,
) -> Result<ScalarField, AnalysisError> {
    require_stationary(coeffs)?;
    let harvest = params.harvesting(species);
    Ok(coeffs.sample_growth(grid, 0.0)?.map(|r| (1.0 - harvest) * r))
}

/// Invasion potential at a semi-trivial state: `q = r·((1−h) − w*/K)`,
/// where `h` is the invader's harvesting and `w*` the resident's steady
/// state. For `h < 1` this equals `(1−h)·r·(1 − w*/((1−h)K))`.
pub fn linearized_potential_at_semitrivial(
    resident: &SteadyState,
    coeffs: &CoefficientSet,
    params: &ModelParams,
) -> Result<ScalarField, AnalysisError> {
    require_stationary(coeffs)?;
    let grid = resident.field.grid();
    let invader = match resident.species {
        Species::U => Species::V,
        Species::V => Species::U,
    };
    let harvest = params.harvesting(invader);
    let k = coeffs.sample_capacity(grid, 0.0)?;
    let r = coeffs.sample_growth(grid, 0.0)?;
    let mut q = ScalarField::zeros(grid);
    for (i, out) in q.values_mut().iter_mut().enumerate() {
        *out = r.values()[i] * ((1.0 - harvest) - resident.field.values()[i] / k.values()[i]);
    }
    Ok(q)
}

/// Principal eigenpair governing growth of the invader at `point`.
/// `resident` must be the steady state of the resident species for the
/// semi-trivial points and is ignored for the trivial one.
pub fn invasion_eigenvalue(
    point: LinearizationPoint,
    resident: Option<&SteadyState>,
    grid: Grid,
    coeffs: &CoefficientSet,
    params: &ModelParams,
) -> Result<EigenPair, AnalysisError> {
    let invader = point.invader();
    let q = match (point, resident) {
        (LinearizationPoint::Trivial(s), _) => trivial_potential(s, grid, coeffs, params)?,
        (_, Some(ss)) => {
            debug_assert_eq!(Some(ss.species), point.resident());
            linearized_potential_at_semitrivial(ss, coeffs, params)?
        }
        (_, None) => {
            let species = point.resident().expect("semi-trivial point has a resident");
            let ss = steady_state_single(species, grid, coeffs, params, 1e-9)?;
            linearized_potential_at_semitrivial(&ss, coeffs, params)?
        }
    };
    principal_eigenvalue(params.diffusion(invader), &q)
}

/// Harvesting threshold below which the invader destabilizes the resident's
/// semi-trivial state, together with the eigenfunction used.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub eigen: EigenPair,
}

/// `1 − (d∫|∇Ψ|² + ∫rΨ²w*/K) / ∫rΨ²`, with `Ψ` the principal eigenfunction
/// of the invader's linearization at the resident steady state `w*`.
fn threshold(resident: &SteadyState, coeffs: &CoefficientSet, params: &ModelParams) -> Result<Threshold, AnalysisError> {
    let grid = resident.field.grid();
    let invader = match resident.species {
        Species::U => Species::V,
        Species::V => Species::U,
    };
    let d = params.diffusion(invader);
    let q = linearized_potential_at_semitrivial(resident, coeffs, params)?;
    let eigen = principal_eigenvalue(d, &q)?;
    let psi = &eigen.eigenfunction;
    let k = coeffs.sample_capacity(grid, 0.0)?;
    let r = coeffs.sample_growth(grid, 0.0)?;
    let psi2 = psi.map(|p| p * p);
    let denom = integrate(&r.zip_map(&psi2, |a, b| a * b));
    if denom <= 1e-14 {
        return Err(AnalysisError::DegenerateDenominator(denom));
    }
    let mut weighted = ScalarField::zeros(grid);
    for (i, out) in weighted.values_mut().iter_mut().enumerate() {
        *out = r.values()[i] * psi2.values()[i] * resident.field.values()[i] / k.values()[i];
    }
    let numer = d * dirichlet_energy(psi) + integrate(&weighted);
    Ok(Threshold {
        value: 1.0 - numer / denom,
        eigen,
    })
}

/// `ν₁` from the steady state `u*`.
pub fn nu1_estimate(ss_u: &SteadyState, coeffs: &CoefficientSet, params: &ModelParams) -> Result<Threshold, AnalysisError> {
    assert_eq!(ss_u.species, Species::U, "nu1 needs the u steady state");
    threshold(ss_u, coeffs, params)
}

/// `μ₁` from the steady state `v*`, with the species roles exchanged.
pub fn mu1_estimate(ss_v: &SteadyState, coeffs: &CoefficientSet, params: &ModelParams) -> Result<Threshold, AnalysisError> {
    assert_eq!(ss_v.species, Species::V, "mu1 needs the v steady state");
    threshold(ss_v, coeffs, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Thresholds {
    pub nu1: Option<f64>,
    pub mu1: Option<f64>,
}

/// Computes whichever of `ν₁`, `μ₁` is defined (`μ < 1` resp. `ν < 1`).
pub fn compute_thresholds(
    grid: Grid,
    coeffs: &CoefficientSet,
    params: &ModelParams,
    tol: f64,
) -> Result<Thresholds, AnalysisError> {
    let mut out = Thresholds::default();
    if params.mu < 1.0 {
        let ss = steady_state_single(Species::U, grid, coeffs, params, tol)?;
        out.nu1 = Some(nu1_estimate(&ss, coeffs, params)?.value);
    }
    if params.nu < 1.0 {
        let ss = steady_state_single(Species::V, grid, coeffs, params, tol)?;
        out.mu1 = Some(mu1_estimate(&ss, coeffs, params)?.value);
    }
    Ok(out)
}

/// Long-time regime of the two species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Coexist,
    UExtinctVSurvives,
    VExtinctUSurvives,
    BothExtinct,
    CoexistConditional,
    Undetermined,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Coexist => "Coexist",
            Regime::UExtinctVSurvives => "UExtinct_VSurvives",
            Regime::VExtinctUSurvives => "VExtinct_USurvives",
            Regime::BothExtinct => "BothExtinct",
            Regime::CoexistConditional => "CoexistConditional",
            Regime::Undetermined => "Undetermined",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Theoretical prediction from the harvesting pair. Coexistence is only
/// asserted when the applicable threshold is supplied and satisfied.
pub fn classify_regime(params: &ModelParams, thresholds: Option<&Thresholds>) -> Regime {
    let (mu, nu) = (params.mu, params.nu);
    match (mu >= 1.0, nu >= 1.0) {
        (true, true) => Regime::BothExtinct,
        (true, false) => Regime::UExtinctVSurvives,
        (false, true) => Regime::VExtinctUSurvives,
        (false, false) => {
            let th = thresholds.copied().unwrap_or_default();
            let via_nu1 = mu <= nu && th.nu1.is_some_and(|nu1| nu < nu1);
            let via_mu1 = nu <= mu && th.mu1.is_some_and(|mu1| mu < mu1);
            if via_nu1 || via_mu1 {
                Regime::Coexist
            } else {
                Regime::CoexistConditional
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Presence {
    Extinct,
    Present,
    Unclear,
}

fn presence(energies: impl Iterator<Item = f64>, tol: f64) -> Presence {
    let (mut below, mut above) = (false, false);
    for e in energies {
        if e < tol {
            below = true;
        } else {
            above = true;
        }
    }
    match (below, above) {
        (true, false) => Presence::Extinct,
        (false, true) => Presence::Present,
        _ => Presence::Unclear,
    }
}

/// Observed outcome from the last `window` records: a species is extinct when
/// its energy stays below `extinct_tol` throughout the window and present
/// when it stays at or above it. Anything else is undetermined.
pub fn detect_outcome(traj: &Trajectory, extinct_tol: f64, window: usize) -> Regime {
    let n = traj.records.len();
    if window == 0 || n < window {
        return Regime::Undetermined;
    }
    let tail = &traj.records[n - window..];
    let u = presence(tail.iter().map(|r| r.energy_u), extinct_tol);
    let v = presence(tail.iter().map(|r| r.energy_v), extinct_tol);
    match (u, v) {
        (Presence::Present, Presence::Present) => Regime::Coexist,
        (Presence::Extinct, Presence::Present) => Regime::UExtinctVSurvives,
        (Presence::Present, Presence::Extinct) => Regime::VExtinctUSurvives,
        (Presence::Extinct, Presence::Extinct) => Regime::BothExtinct,
        _ => Regime::Undetermined,
    }
}

/// Prediction next to observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub predicted: Regime,
    pub observed: Regime,
    pub thresholds: Thresholds,
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "predicted: {}", self.predicted)?;
        writeln!(f, "observed: {}", self.observed)?;
        match self.thresholds.nu1 {
            Some(v) => writeln!(f, "nu1: {v:.10}")?,
            None => writeln!(f, "nu1: n/a")?,
        }
        match self.thresholds.mu1 {
            Some(v) => write!(f, "mu1: {v:.10}"),
            None => write!(f, "mu1: n/a"),
        }
    }
}

/// Least-squares slope of `ln y` against `t`. Non-positive samples are an error
/// in the caller's setup and yield `None`.
pub fn log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    if t.len() != y.len() || t.len() < 2 || y.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = t.iter().zip(&ly).map(|(a, b)| (a - mt) * (b - my)).sum();
    let var: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    Some(cov / var)
}

/// Biased (÷N) autocorrelation of the mean-removed series at `lag`.
pub fn autocorrelation(series: &[f64], lag: usize) -> f64 {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|v| (v - mean) * (v - mean)).sum();
    if var == 0.0 || lag >= n {
        return 0.0;
    }
    let cov: f64 = (0..n - lag).map(|i| (series[i] - mean) * (series[i + lag] - mean)).sum();
    cov / var
}

/// Lag (in samples) of the highest autocorrelation peak past the first
/// trough, searched up to `max_lag`.
pub fn dominant_period(series: &[f64], max_lag: usize) -> Option<usize> {
    let max_lag = max_lag.min(series.len().saturating_sub(1));
    let acf: Vec<f64> = (0..=max_lag).map(|k| autocorrelation(series, k)).collect();
    let trough = (1..max_lag).find(|&k| acf[k] <= acf[k - 1] && acf[k] <= acf[k + 1])?;
    (trough + 1..max_lag)
        .filter(|&k| acf[k] >= acf[k - 1] && acf[k] >= acf[k + 1])
        .max_by(|&a, &b| acf[a].total_cmp(&acf[b]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::EnergyRecord;
    use std::f64::consts::PI;

    fn exp1() -> CoefficientSet {
        CoefficientSet::parse("2.1+cos(pi*x)*cos(pi*y)", "1.2", "1.8", "1.8").unwrap()
    }

    fn traj(energies: &[(f64, f64)]) -> Trajectory {
        let g = Grid::new(3).unwrap();
        Trajectory {
            records: energies
                .iter()
                .enumerate()
                .map(|(i, &(eu, ev))| EnergyRecord {
                    t: i as f64,
                    energy_u: eu,
                    energy_v: ev,
                    mass_u: 0.0,
                    mass_v: 0.0,
                })
                .collect(),
            snapshots: vec![],
            final_state: State::new(ScalarField::zeros(g), ScalarField::zeros(g), 0.0),
        }
    }

    #[test]
    fn constant_steady_state() {
        let g = Grid::new(9).unwrap();
        let c = CoefficientSet::parse("2", "1", "1", "1").unwrap();
        let ss = steady_state_single(Species::U, g, &c, &ModelParams::unit_diffusion(0.5, 0.0), 1e-10).unwrap();
        assert!(ss.field.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        assert!(ss.residual <= 1e-10);
        assert!(!ss.trivial);
    }

    #[test]
    fn full_harvest_leaves_only_zero() {
        let g = Grid::new(9).unwrap();
        let ss = steady_state_single(Species::U, g, &exp1(), &ModelParams::unit_diffusion(1.0, 0.0), 1e-10).unwrap();
        assert!(ss.trivial);
        assert_eq!(ss.field.max_abs(), 0.0);
    }

    #[test]
    fn time_dependent_coefficients_are_refused() {
        let g = Grid::new(9).unwrap();
        let c = CoefficientSet::parse("2+cos(t)", "1", "1", "1").unwrap();
        assert_eq!(
            steady_state_single(Species::U, g, &c, &ModelParams::unit_diffusion(0.1, 0.1), 1e-8),
            Err(AnalysisError::TimeDependent)
        );
        assert_eq!(
            trivial_potential(Species::U, g, &c, &ModelParams::unit_diffusion(0.1, 0.1)),
            Err(AnalysisError::TimeDependent)
        );
    }

    #[test]
    fn k_inequality_degenerate_for_constant_capacity() {
        let g = Grid::new(9).unwrap();
        let c = CoefficientSet::parse("2", "1.2", "1", "1").unwrap();
        let p = ModelParams::unit_diffusion(0.3, 0.0);
        let ss = steady_state_single(Species::U, g, &c, &p, 1e-10).unwrap();
        let ki = check_k_inequality(&ss, &c, &p).unwrap();
        assert!(!ki.applicable);
        assert!(!ki.holds);
        assert!((ki.lhs - ki.rhs).abs() < 1e-12);
    }

    #[test]
    fn constant_potential_eigenvalue_is_exact() {
        let g = Grid::new(17).unwrap();
        for d in [0.01, 1.0, 5.0] {
            let ep = principal_eigenvalue(d, &ScalarField::constant(g, 0.7)).unwrap();
            assert!((ep.lambda - 0.7).abs() < 1e-10);
            let c = ep.eigenfunction.values()[0];
            assert!(ep.eigenfunction.values().iter().all(|&v| (v - c).abs() < 1e-12));
            assert!((ep.eigenfunction.energy() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalue_of_separable_potential() {
        // q = a·cos(πx) has no closed form, but λ must lie between the mean
        // and the max of q and the residual must be tiny.
        let g = Grid::new(17).unwrap();
        let q = ScalarField::from_fn(g, |x, _| 0.5 * (PI * x).cos());
        let ep = principal_eigenvalue(1.0, &q).unwrap();
        assert!(ep.lambda > 0.0 && ep.lambda < 0.5);
        assert!(ep.residual <= 1e-8);
        assert!(ep.eigenfunction.min() > -1e-8);
    }

    #[test]
    fn trivial_state_eigenvalues() {
        let g = Grid::new(17).unwrap();
        let c = exp1();
        for mu in [0.0, 0.0009, 0.5, 1.5] {
            let p = ModelParams::unit_diffusion(mu, 0.0);
            let ep = invasion_eigenvalue(LinearizationPoint::Trivial(Species::U), None, g, &c, &p).unwrap();
            assert!((ep.lambda - (1.0 - mu) * 1.2).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_coefficient_threshold_equals_mu() {
        let g = Grid::new(9).unwrap();
        let c = CoefficientSet::parse("2", "1.3", "1", "1").unwrap();
        for (mu, nu) in [(0.2, 0.2), (0.1, 0.4)] {
            let p = ModelParams::unit_diffusion(mu, nu);
            let ss = steady_state_single(Species::U, g, &c, &p, 1e-11).unwrap();
            let th = nu1_estimate(&ss, &c, &p).unwrap();
            assert!((th.value - mu).abs() < 1e-8, "nu1 = {}", th.value);
            let q = linearized_potential_at_semitrivial(&ss, &c, &p).unwrap();
            assert!(q.values().iter().all(|&v| (v - 1.3 * (mu - nu)).abs() < 1e-10));
        }
    }

    #[test]
    fn classification_by_harvesting() {
        let p = |mu, nu| ModelParams::unit_diffusion(mu, nu);
        assert_eq!(classify_regime(&p(1.5, 0.08), None), Regime::UExtinctVSurvives);
        assert_eq!(classify_regime(&p(0.08, 1.5), None), Regime::VExtinctUSurvives);
        assert_eq!(classify_regime(&p(1.5, 1.5), None), Regime::BothExtinct);
        assert_eq!(classify_regime(&p(1.0, 1.0), None), Regime::BothExtinct);
        assert_eq!(classify_regime(&p(0.0009, 0.001), None), Regime::CoexistConditional);
        let th = Thresholds { nu1: Some(0.002), mu1: None };
        assert_eq!(classify_regime(&p(0.0009, 0.001), Some(&th)), Regime::Coexist);
        let th = Thresholds { nu1: Some(0.0009), mu1: None };
        assert_eq!(classify_regime(&p(0.0009, 0.001), Some(&th)), Regime::CoexistConditional);
        let th = Thresholds { nu1: None, mu1: Some(0.001) };
        assert_eq!(classify_regime(&p(0.0009, 0.0005), Some(&th)), Regime::Coexist);
    }

    #[test]
    fn outcome_detection() {
        let sustained = |eu: f64, ev: f64| traj(&vec![(eu, ev); 60]);
        assert_eq!(detect_outcome(&sustained(0.0, 1.2), 1e-8, 50), Regime::UExtinctVSurvives);
        assert_eq!(detect_outcome(&sustained(0.0, 0.0), 1e-8, 50), Regime::BothExtinct);
        assert_eq!(detect_outcome(&sustained(0.3, 0.0), 1e-8, 50), Regime::VExtinctUSurvives);
        assert_eq!(detect_outcome(&sustained(0.3, 0.2), 1e-8, 50), Regime::Coexist);
        assert_eq!(detect_outcome(&sustained(0.3, 0.2), 1e-8, 61), Regime::Undetermined);
        let mut flicker: Vec<(f64, f64)> = vec![(1.0, 1.0); 60];
        flicker[55].0 = 1e-9;
        assert_eq!(detect_outcome(&traj(&flicker), 1e-8, 50), Regime::Undetermined);
    }

    #[test]
    fn log_slope_recovers_rate() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        assert!((log_slope(&t, &y).unwrap() + 0.7).abs() < 1e-12);
        assert_eq!(log_slope(&t, &[0.0; 20]), None);
    }

    #[test]
    fn dominant_period_of_sinusoid() {
        let s: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.1).cos() + 0.3 * (k as f64 * 0.2).sin()).collect();
        let lag = dominant_period(&s, 300).unwrap();
        assert!((lag as f64 - 2.0 * PI / 0.1).abs() <= 1.0, "lag {lag}");
    }
}
