//! Finite-difference solver for a two-species diffusive competition model
//! with constant-effort harvesting and spatially heterogeneous coefficients.

pub mod analysis;
pub mod coeff;
pub mod grid;
pub mod linalg;
pub mod stepper;
pub mod trajectory;

pub use analysis::{
    classify_regime, detect_outcome, principal_eigenvalue, steady_state_single, AnalysisError, EigenPair, Regime,
    SteadyState, Thresholds,
};
pub use coeff::{CoeffExpr, CoefficientError, CoefficientSet, Species};
pub use grid::{Grid, GridError, ScalarField};
pub use stepper::{
    HarvestingModel, Kinetics, ModelParams, SolverSettings, State, StepError, Stepper, TransformedModel,
};
pub use trajectory::{simulate, EnergyRecord, SimulationError, TimePlan, Trajectory};
