//! Decoupled, linearized backward-Euler stepping of the harvested
//! competition-diffusion system.
//!
//! Each step freezes the competition term at the previous densities, so the
//! two species decouple into independent linear systems
//!
//! ```text
//! (1/Δt)·w⁺ − d·L w⁺ + c·w⁺ = w/Δt,    c_u = r·(μ − 1 + (u+v)/K)
//!                                       c_v = r·(ν − 1 + (u+v)/K)
//! ```
//!
//! with K and r evaluated at the new time level. Rows are scaled by the
//! trapezoidal weights, which makes the matrix symmetric; when
//! `1/Δt + min c > 0` it is also a strictly diagonally dominant M-matrix, so
//! non-negative data stay non-negative.

use thiserror::Error;

use crate::coeff::{CoeffExpr, CoefficientError, CoefficientSet, Species};
use crate::grid::{Grid, ScalarField};
use crate::linalg::{pcg, CsrMatrix, SolveError, SolveStats};

/// Values in `[-NEGATIVE_ROUNDOFF, 0)` are round-off and get clamped to zero.
pub const NEGATIVE_ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("time step {dt} loses definiteness for species {species}; admissible dt < {max_dt}")]
    DtGuard { species: Species, dt: f64, max_dt: f64 },
    #[error("linear solve for species {species} failed: {source}")]
    Solve { species: Species, source: SolveError },
    #[error("species {species} went negative ({value:e}) at vertex {index}")]
    Negativity { species: Species, value: f64, index: usize },
    #[error("transform needs mu < 1 and nu < 1 (got mu = {mu}, nu = {nu})")]
    HarvestTooLarge { mu: f64, nu: f64 },
}

/// Diffusion rates and harvesting coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub mu: f64,
    pub nu: f64,
}

impl ModelParams {
    pub fn new(d1: f64, d2: f64, mu: f64, nu: f64) -> Result<Self, StepError> {
        let p = Self { d1, d2, mu, nu };
        p.validate()?;
        Ok(p)
    }

    /// Unit diffusion with the given harvesting pair.
    pub fn unit_diffusion(mu: f64, nu: f64) -> Self {
        Self { d1: 1.0, d2: 1.0, mu, nu }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        let mut problems = Vec::new();
        if !(self.d1 > 0.0 && self.d1.is_finite()) {
            problems.push(format!("d1 must be positive, got {}", self.d1));
        }
        if !(self.d2 > 0.0 && self.d2.is_finite()) {
            problems.push(format!("d2 must be positive, got {}", self.d2));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            problems.push(format!("mu must be non-negative, got {}", self.mu));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            problems.push(format!("nu must be non-negative, got {}", self.nu));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(StepError::InvalidParams(problems.join("; ")))
        }
    }

    pub fn diffusion(&self, species: Species) -> f64 {
        match species {
            Species::U => self.d1,
            Species::V => self.d2,
        }
    }

    pub fn harvesting(&self, species: Species) -> f64 {
        match species {
            Species::U => self.mu,
            Species::V => self.nu,
        }
    }
}

/// Both densities at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: ScalarField,
    pub v: ScalarField,
    pub t: f64,
}

impl State {
    pub fn new(u: ScalarField, v: ScalarField, t: f64) -> Self {
        assert_eq!(u.grid(), v.grid(), "species live on different grids");
        Self { u, v, t }
    }

    /// Samples the initial densities of `coeffs` at `t = 0`.
    pub fn initial(coeffs: &CoefficientSet, grid: Grid) -> Result<Self, CoefficientError> {
        let (u, v) = coeffs.sample_initial(grid)?;
        Ok(Self::new(u, v, 0.0))
    }

    pub fn grid(&self) -> Grid {
        self.u.grid()
    }

    pub fn field(&self, species: Species) -> &ScalarField {
        match species {
            Species::U => &self.u,
            Species::V => &self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub rel_tol: f64,
    /// Iteration cap; `None` means `10·n²`.
    pub max_iters: Option<usize>,
    pub dt_guard: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iters: None,
            dt_guard: true,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn max_iters_for(&self, grid: Grid) -> usize {
        self.max_iters.unwrap_or(10 * grid.len())
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        if self.max_iters == Some(0) {
            return Err("max_iters must be at least 1".to_string());
        }
        Ok(())
    }
}

/// One species' linear system `W·((1/Δt)I − d·L + diag(c)) w⁺ = W·w/Δt`,
/// where `W` holds the relative quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOperator {
    grid: Grid,
    matrix: CsrMatrix,
    rhs: Vec<f64>,
    guess: Vec<f64>,
    inv_dt: f64,
    min_reaction: f64,
}

impl StepOperator {
    pub fn assemble(
        grid: Grid,
        diffusion: f64,
        dt: f64,
        reaction: &ScalarField,
        previous: &ScalarField,
    ) -> Self {
        let n = grid.n();
        let last = n - 1;
        let inv_dt = 1.0 / dt;
        let h = grid.spacing();
        let coupling = diffusion / (h * h);
        let mirror = |k: usize, up: bool| -> usize {
            match (k, up) {
                (0, false) => 1,
                (k, true) if k == last => last - 1,
                (k, true) => k + 1,
                (k, false) => k - 1,
            }
        };
        let mut rows = Vec::with_capacity(grid.len());
        let mut rhs = Vec::with_capacity(grid.len());
        for j in 0..n {
            for i in 0..n {
                let w = grid.relative_weight(i, j);
                let k = grid.index(i, j);
                let mut row = Vec::with_capacity(5);
                row.push((k, w * (inv_dt + 4.0 * coupling + reaction.values()[k])));
                for nb in [
                    grid.index(mirror(i, false), j),
                    grid.index(mirror(i, true), j),
                    grid.index(i, mirror(j, false)),
                    grid.index(i, mirror(j, true)),
                ] {
                    if coupling != 0.0 {
                        row.push((nb, -w * coupling));
                    }
                }
                rows.push(row);
                rhs.push(w * previous.values()[k] * inv_dt);
            }
        }
        Self {
            grid,
            matrix: CsrMatrix::from_rows(rows),
            rhs,
            guess: previous.values().to_vec(),
            inv_dt,
            min_reaction: reaction.min(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `1/Δt + min c > 0`, which makes the matrix a diagonally dominant
    /// M-matrix and hence positive definite.
    pub fn is_definite(&self) -> bool {
        self.inv_dt + self.min_reaction > 0.0
    }

    /// Largest time step for which the definiteness check passes.
    pub fn max_admissible_dt(&self) -> f64 {
        if self.min_reaction >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / self.min_reaction
        }
    }
}

/// Solves one step system with Jacobi-preconditioned conjugate gradients,
/// warm-started from the previous density.
pub fn solve_spd(op: &StepOperator, settings: &SolverSettings) -> Result<ScalarField, SolveError> {
    solve_spd_with_stats(op, settings).map(|(f, _)| f)
}

pub fn solve_spd_with_stats(
    op: &StepOperator,
    settings: &SolverSettings,
) -> Result<(ScalarField, SolveStats), SolveError> {
    let mut x = op.guess.clone();
    let stats = pcg(&op.matrix, &op.rhs, &mut x, settings.rel_tol, settings.max_iters_for(op.grid))?;
    let field = ScalarField::from_values(op.grid, x).expect("solver output has grid length");
    Ok((field, stats))
}

/// Supplies the frozen reaction coefficients of one step.
pub trait Kinetics {
    fn diffusion(&self, species: Species) -> f64;

    /// `(c_u, c_v)` for the step ending at `t_new`, frozen at `state`.
    fn reaction_coefficients(
        &mut self,
        state: &State,
        t_new: f64,
    ) -> Result<(ScalarField, ScalarField), StepError>;
}

/// Memoized sampling of one coefficient expression; time-independent
/// expressions are sampled once.
#[derive(Debug, Clone)]
struct SampledCoefficient {
    expr: CoeffExpr,
    stationary: bool,
    cached: Option<(f64, ScalarField)>,
}

impl SampledCoefficient {
    fn new(expr: CoeffExpr) -> Self {
        Self {
            stationary: !expr.depends_on_t(),
            expr,
            cached: None,
        }
    }

    fn get(
        &mut self,
        t: f64,
        sample: impl FnOnce(&CoeffExpr, f64) -> Result<ScalarField, CoefficientError>,
    ) -> Result<&ScalarField, CoefficientError> {
        let hit = matches!(&self.cached, Some((tc, _)) if self.stationary || *tc == t);
        if !hit {
            self.cached = Some((t, sample(&self.expr, t)?));
        }
        Ok(&self.cached.as_ref().expect("populated above").1)
    }
}

fn sample_capacity_expr(expr: &CoeffExpr, grid: Grid, t: f64) -> Result<ScalarField, CoefficientError> {
    CoefficientSet {
        k: expr.clone(),
        r: CoeffExpr::constant(0.0),
        u0: CoeffExpr::constant(0.0),
        v0: CoeffExpr::constant(0.0),
    }
    .sample_capacity(grid, t)
}

fn sample_growth_expr(expr: &CoeffExpr, grid: Grid, t: f64) -> Result<ScalarField, CoefficientError> {
    CoefficientSet {
        k: CoeffExpr::constant(1.0),
        r: expr.clone(),
        u0: CoeffExpr::constant(0.0),
        v0: CoeffExpr::constant(0.0),
    }
    .sample_growth(grid, t)
}

/// The harvested model: growth `r·w·(1 − (u+v)/K)` minus harvesting `μ·r·w`.
#[derive(Debug, Clone)]
pub struct HarvestingModel {
    grid: Grid,
    params: ModelParams,
    k: SampledCoefficient,
    r: SampledCoefficient,
}

impl HarvestingModel {
    pub fn new(grid: Grid, coeffs: &CoefficientSet, params: ModelParams) -> Self {
        Self {
            grid,
            params,
            k: SampledCoefficient::new(coeffs.k.clone()),
            r: SampledCoefficient::new(coeffs.r.clone()),
        }
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    /// `c = r·(harvest − 1 + (u+v)/K)` at time `t_new`.
    pub fn reaction_coefficient(
        &mut self,
        species: Species,
        state: &State,
        t_new: f64,
    ) -> Result<ScalarField, StepError> {
        let grid = self.grid;
        let harvest = self.params.harvesting(species);
        let k = self.k.get(t_new, |e, t| sample_capacity_expr(e, grid, t))?.clone();
        let r = self.r.get(t_new, |e, t| sample_growth_expr(e, grid, t))?;
        let mut c = ScalarField::zeros(grid);
        let (u, v) = (state.u.values(), state.v.values());
        for (idx, out) in c.values_mut().iter_mut().enumerate() {
            let total = u[idx] + v[idx];
            *out = r.values()[idx] * (harvest - 1.0 + total / k.values()[idx]);
        }
        Ok(c)
    }
}

impl Kinetics for HarvestingModel {
    fn diffusion(&self, species: Species) -> f64 {
        self.params.diffusion(species)
    }

    fn reaction_coefficients(
        &mut self,
        state: &State,
        t_new: f64,
    ) -> Result<(ScalarField, ScalarField), StepError> {
        let cu = self.reaction_coefficient(Species::U, state, t_new)?;
        let cv = self.reaction_coefficient(Species::V, state, t_new)?;
        Ok((cu, cv))
    }
}

/// The harvest-free reparameterization with `K₁ = (1−μ)K`, `K₂ = (1−ν)K`,
/// `r₁ = 1−μ`, `r₂ = 1−ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedCoefficients {
    pub k1: CoeffExpr,
    pub k2: CoeffExpr,
    pub r1: f64,
    pub r2: f64,
    pub r: CoeffExpr,
    pub u0: CoeffExpr,
    pub v0: CoeffExpr,
    pub d1: f64,
    pub d2: f64,
}

/// Rewrites the harvested model without explicit harvesting terms. Only
/// defined for `μ, ν < 1`, where both reduced capacities stay positive.
pub fn transform_parameters(
    params: &ModelParams,
    coeffs: &CoefficientSet,
) -> Result<TransformedCoefficients, StepError> {
    params.validate()?;
    if params.mu >= 1.0 || params.nu >= 1.0 {
        return Err(StepError::HarvestTooLarge {
            mu: params.mu,
            nu: params.nu,
        });
    }
    let r1 = 1.0 - params.mu;
    let r2 = 1.0 - params.nu;
    Ok(TransformedCoefficients {
        k1: coeffs.k.scaled(r1),
        k2: coeffs.k.scaled(r2),
        r1,
        r2,
        r: coeffs.r.clone(),
        u0: coeffs.u0.clone(),
        v0: coeffs.v0.clone(),
        d1: params.d1,
        d2: params.d2,
    })
}

/// Kinetics of the transformed system: `c_u = −r₁·r·(1 − (u+v)/K₁)`.
#[derive(Debug, Clone)]
pub struct TransformedModel {
    grid: Grid,
    r1: f64,
    r2: f64,
    d1: f64,
    d2: f64,
    k1: SampledCoefficient,
    k2: SampledCoefficient,
    r: SampledCoefficient,
}

impl TransformedModel {
    pub fn new(grid: Grid, system: &TransformedCoefficients) -> Self {
        Self {
            grid,
            r1: system.r1,
            r2: system.r2,
            d1: system.d1,
            d2: system.d2,
            k1: SampledCoefficient::new(system.k1.clone()),
            k2: SampledCoefficient::new(system.k2.clone()),
            r: SampledCoefficient::new(system.r.clone()),
        }
    }
}

impl Kinetics for TransformedModel {
    fn diffusion(&self, species: Species) -> f64 {
        match species {
            Species::U => self.d1,
            Species::V => self.d2,
        }
    }

    fn reaction_coefficients(
        &mut self,
        state: &State,
        t_new: f64,
    ) -> Result<(ScalarField, ScalarField), StepError> {
        let grid = self.grid;
        let r = self.r.get(t_new, |e, t| sample_growth_expr(e, grid, t))?.clone();
        let k1 = self.k1.get(t_new, |e, t| sample_capacity_expr(e, grid, t))?;
        let total = state.u.zip_map(&state.v, |a, b| a + b);
        let mut cu = ScalarField::zeros(grid);
        for (idx, out) in cu.values_mut().iter_mut().enumerate() {
            let s = total.values()[idx];
            *out = -self.r1 * r.values()[idx] * (1.0 - s / k1.values()[idx]);
        }
        let k2 = self.k2.get(t_new, |e, t| sample_capacity_expr(e, grid, t))?;
        let mut cv = ScalarField::zeros(grid);
        for (idx, out) in cv.values_mut().iter_mut().enumerate() {
            let s = total.values()[idx];
            *out = -self.r2 * r.values()[idx] * (1.0 - s / k2.values()[idx]);
        }
        Ok((cu, cv))
    }
}

/// Order in which the two independent solves of a step are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveOrder {
    #[default]
    UFirst,
    VFirst,
}

/// Advances a state with a fixed [`Kinetics`] and solver configuration.
#[derive(Debug, Clone)]
pub struct Stepper<M> {
    model: M,
    settings: SolverSettings,
    order: SolveOrder,
    last_iterations: (usize, usize),
}

impl<M: Kinetics> Stepper<M> {
    pub fn new(model: M, settings: SolverSettings) -> Self {
        Self {
            model,
            settings,
            order: SolveOrder::default(),
            last_iterations: (0, 0),
        }
    }

    pub fn with_order(mut self, order: SolveOrder) -> Self {
        self.order = order;
        self
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// CG iterations spent on `(u, v)` in the latest step.
    pub fn last_iterations(&self) -> (usize, usize) {
        self.last_iterations
    }

    pub fn step(&mut self, state: &State, dt: f64) -> Result<State, StepError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StepError::InvalidDt(dt));
        }
        let grid = state.grid();
        let t_new = state.t + dt;
        let (cu, cv) = self.model.reaction_coefficients(state, t_new)?;
        let ops = [
            (
                Species::U,
                StepOperator::assemble(grid, self.model.diffusion(Species::U), dt, &cu, &state.u),
            ),
            (
                Species::V,
                StepOperator::assemble(grid, self.model.diffusion(Species::V), dt, &cv, &state.v),
            ),
        ];
        if self.settings.dt_guard {
            for (species, op) in &ops {
                if !op.is_definite() {
                    return Err(StepError::DtGuard {
                        species: *species,
                        dt,
                        max_dt: op.max_admissible_dt(),
                    });
                }
            }
        }
        let solve = |(species, op): &(Species, StepOperator)| -> Result<(ScalarField, usize), StepError> {
            let (mut field, stats) = solve_spd_with_stats(op, &self.settings)
                .map_err(|source| StepError::Solve { species: *species, source })?;
            clamp_roundoff(*species, &mut field)?;
            Ok((field, stats.iterations))
        };
        let ((u, iu), (v, iv)) = match self.order {
            SolveOrder::UFirst => {
                let u = solve(&ops[0])?;
                (u, solve(&ops[1])?)
            }
            SolveOrder::VFirst => {
                let v = solve(&ops[1])?;
                (solve(&ops[0])?, v)
            }
        };
        self.last_iterations = (iu, iv);
        Ok(State::new(u, v, t_new))
    }
}

fn clamp_roundoff(species: Species, field: &mut ScalarField) -> Result<(), StepError> {
    for (index, value) in field.values_mut().iter_mut().enumerate() {
        if *value < 0.0 {
            if *value < -NEGATIVE_ROUNDOFF {
                return Err(StepError::Negativity {
                    species,
                    value: *value,
                    index,
                });
            }
            *value = 0.0;
        }
    }
    Ok(())
}

/// `c_u = r·(μ − 1 + (uⁿ+vⁿ)/K)` with K and r sampled at `t_new`.
pub fn reaction_coefficient_u(
    state: &State,
    coeffs: &CoefficientSet,
    params: &ModelParams,
    t_new: f64,
) -> Result<ScalarField, StepError> {
    HarvestingModel::new(state.grid(), coeffs, *params).reaction_coefficient(Species::U, state, t_new)
}

/// `c_v = r·(ν − 1 + (uⁿ+vⁿ)/K)` with K and r sampled at `t_new`.
pub fn reaction_coefficient_v(
    state: &State,
    coeffs: &CoefficientSet,
    params: &ModelParams,
    t_new: f64,
) -> Result<ScalarField, StepError> {
    HarvestingModel::new(state.grid(), coeffs, *params).reaction_coefficient(Species::V, state, t_new)
}

/// One step of the harvested model. Repeated stepping should go through a
/// [`Stepper`], which caches time-independent coefficient samples.
pub fn step(
    state: &State,
    coeffs: &CoefficientSet,
    params: &ModelParams,
    dt: f64,
    settings: &SolverSettings,
) -> Result<State, StepError> {
    params.validate()?;
    Stepper::new(HarvestingModel::new(state.grid(), coeffs, *params), *settings).step(state, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::laplacian_neumann;

    fn set(k: &str, r: &str, u0: &str, v0: &str) -> CoefficientSet {
        CoefficientSet::parse(k, r, u0, v0).unwrap()
    }

    fn exp1() -> CoefficientSet {
        set("2.1+cos(pi*x)*cos(pi*y)", "1.2", "1.8", "1.8")
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.0).is_ok());
        let err = ModelParams::new(0.0, 1.0, -1.0, 0.0).unwrap_err();
        match err {
            StepError::InvalidParams(msg) => {
                assert!(msg.contains("d1"));
                assert!(msg.contains("mu"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reaction_coefficient_examples() {
        let g = Grid::new(9).unwrap();
        let c = set("2", "1", "0.5", "0.5");
        let state = State::initial(&c, g).unwrap();
        let cu = reaction_coefficient_u(&state, &c, &ModelParams::unit_diffusion(0.5, 0.0), 0.1).unwrap();
        assert!(cu.values().iter().all(|&v| v == 0.0));

        let e1 = exp1();
        let state = State::initial(&e1, g).unwrap();
        let cu = reaction_coefficient_u(&state, &e1, &ModelParams::unit_diffusion(1.5, 0.08), 0.1).unwrap();
        let expected = 1.2 * (1.5 - 1.0 + 3.6 / 3.1);
        assert!((cu.at(0, 0) - expected).abs() < 1e-14);
        assert!((cu.at(0, 0) - 1.993_548_3).abs() < 1e-7);

        let zero = set("2.1+cos(pi*x)*cos(pi*y)", "1.2+x", "0", "0");
        let state = State::initial(&zero, g).unwrap();
        let cu = reaction_coefficient_u(&state, &zero, &ModelParams::unit_diffusion(0.0, 0.0), 0.0).unwrap();
        for j in 0..9 {
            for i in 0..9 {
                let (x, _) = g.coords(i, j);
                assert!((cu.at(i, j) + 1.2 + x).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reaction_coefficient_rejects_bad_capacity() {
        let g = Grid::new(5).unwrap();
        let c = set("x-0.5", "1", "1", "1");
        let state = State::initial(&c, g).unwrap();
        assert!(matches!(
            reaction_coefficient_u(&state, &c, &ModelParams::unit_diffusion(0.0, 0.0), 0.0),
            Err(StepError::Coefficient(CoefficientError::NonPositiveCapacity { .. }))
        ));
    }

    #[test]
    fn operator_is_symmetric_m_matrix() {
        for n in [3, 4, 9] {
            let g = Grid::new(n).unwrap();
            let c = ScalarField::from_fn(g, |x, y| 0.3 + x - y);
            let prev = ScalarField::constant(g, 1.0);
            let op = StepOperator::assemble(g, 0.7, 0.05, &c, &prev);
            assert!(op.matrix().is_symmetric(1e-12), "n = {n}");
            assert!(op.matrix().has_nonpositive_offdiagonal());
            assert!(op.is_definite());
        }
    }

    #[test]
    fn operator_matches_laplacian() {
        let g = Grid::new(7).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (3.0 * x).sin() + y * y * x);
        let zero = ScalarField::zeros(g);
        let dt = 0.25;
        let d = 1.3;
        let op = StepOperator::assemble(g, d, dt, &zero, &zero);
        let mut af = vec![0.0; g.len()];
        op.matrix().mul_vec(f.values(), &mut af);
        let lf = laplacian_neumann(&f);
        for j in 0..7 {
            for i in 0..7 {
                let k = g.index(i, j);
                let expected = g.relative_weight(i, j) * (f.values()[k] / dt - d * lf.values()[k]);
                assert!((af[k] - expected).abs() < 1e-9 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn identity_system_returns_rhs() {
        let g = Grid::new(9).unwrap();
        let rhs = ScalarField::from_fn(g, |x, y| 1.0 + x * y);
        let op = StepOperator::assemble(g, 0.0, 1.0, &ScalarField::zeros(g), &rhs);
        let sol = solve_spd(&op, &SolverSettings::default()).unwrap();
        assert_eq!(sol, rhs);
    }

    #[test]
    fn pure_diffusion_keeps_constants() {
        let g = Grid::new(17).unwrap();
        let rhs = ScalarField::constant(g, 2.5);
        let op = StepOperator::assemble(g, 1.0, 0.1, &ScalarField::zeros(g), &rhs);
        let sol = solve_spd(&op, &SolverSettings::default()).unwrap();
        assert!(sol.values().iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn discrete_fixed_point_is_preserved() {
        let g = Grid::new(9).unwrap();
        let c = set("2", "1", "1", "0");
        let s0 = State::initial(&c, g).unwrap();
        for dt in [0.01, 0.1, 1.0] {
            let s1 = step(&s0, &c, &ModelParams::unit_diffusion(0.5, 0.3), dt, &SolverSettings::default()).unwrap();
            assert!(s1.u.values().iter().all(|&v| v == 1.0));
            assert!(s1.v.values().iter().all(|&v| v == 0.0));
            assert_eq!(s1.t, dt);
        }
    }

    #[test]
    fn absent_species_stays_absent() {
        let g = Grid::new(9).unwrap();
        let c = set("2.1+cos(pi*x)*cos(pi*y)", "1.2", "1+x*y", "0");
        let mut stepper = Stepper::new(
            HarvestingModel::new(g, &c, ModelParams::unit_diffusion(0.2, 0.1)),
            SolverSettings::default(),
        );
        let mut s = State::initial(&c, g).unwrap();
        for _ in 0..20 {
            s = stepper.step(&s, 0.1).unwrap();
            assert!(s.v.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dt_guard_reports_admissible_step() {
        let g = Grid::new(5).unwrap();
        // c = r(0 - 1 + 0) = -4 everywhere; guard needs dt < 0.25
        let c = set("1", "4", "0", "0");
        let s0 = State::initial(&c, g).unwrap();
        let params = ModelParams::unit_diffusion(0.0, 0.0);
        match step(&s0, &c, &params, 0.5, &SolverSettings::default()) {
            Err(StepError::DtGuard { max_dt, .. }) => assert!((max_dt - 0.25).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(step(&s0, &c, &params, 0.2, &SolverSettings::default()).is_ok());
        assert!(matches!(
            step(&s0, &c, &params, 0.0, &SolverSettings::default()),
            Err(StepError::InvalidDt(_))
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = Grid::new(17).unwrap();
        let c = set("2.1+cos(pi*x)*cos(pi*y)", "1.2", "1+x", "1+y");
        let s0 = State::initial(&c, g).unwrap();
        let settings = SolverSettings {
            rel_tol: 1e-12,
            max_iters: Some(1),
            dt_guard: true,
        };
        assert!(matches!(
            step(&s0, &c, &ModelParams::unit_diffusion(0.0, 0.0), 0.1, &settings),
            Err(StepError::Solve { species: Species::U, source: SolveError::NotConverged { .. } })
        ));
    }

    #[test]
    fn solve_order_does_not_change_bits() {
        let g = Grid::new(17).unwrap();
        let c = set("2.1+cos(pi*x)*cos(pi*y)", "1.2", "1+x", "1.5-y*x");
        let params = ModelParams::unit_diffusion(0.0009, 0.0025);
        let run = |order| {
            let mut st = Stepper::new(HarvestingModel::new(g, &c, params), SolverSettings::default()).with_order(order);
            let mut s = State::initial(&c, g).unwrap();
            for _ in 0..10 {
                s = st.step(&s, 0.1).unwrap();
            }
            s
        };
        let a = run(SolveOrder::UFirst);
        let b = run(SolveOrder::VFirst);
        let bits = |f: &ScalarField| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.u), bits(&b.u));
        assert_eq!(bits(&a.v), bits(&b.v));
    }

    #[test]
    fn transform_examples() {
        let c = set("2", "1", "1", "1");
        let id = transform_parameters(&ModelParams::unit_diffusion(0.0, 0.0), &c).unwrap();
        assert_eq!((id.r1, id.r2), (1.0, 1.0));
        assert_eq!(id.k1.eval(0.0, 0.3, 0.3).unwrap(), 2.0);
        let half = transform_parameters(&ModelParams::unit_diffusion(0.5, 0.0), &c).unwrap();
        assert_eq!(half.k1.eval(0.0, 0.1, 0.9).unwrap(), 1.0);
        assert_eq!(half.r1, 0.5);
        assert!(matches!(
            transform_parameters(&ModelParams::unit_diffusion(1.0, 0.0), &c),
            Err(StepError::HarvestTooLarge { .. })
        ));
        assert!(matches!(
            transform_parameters(&ModelParams::unit_diffusion(0.0, 1.5), &c),
            Err(StepError::HarvestTooLarge { .. })
        ));
    }

    #[test]
    fn stationary_samples_are_cached() {
        let mut s = SampledCoefficient::new(crate::coeff::parse("x").unwrap());
        let g = Grid::new(3).unwrap();
        let mut calls = 0;
        for t in [0.0, 1.0, 2.0] {
            s.get(t, |e, t| {
                calls += 1;
                sample_growth_expr(e, g, t)
            })
            .unwrap();
        }
        assert_eq!(calls, 1);
    }
}
