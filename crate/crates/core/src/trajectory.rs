//! Time integration driver recording energies, masses and field snapshots.

use thiserror::Error;

use crate::grid::ScalarField;
use crate::stepper::{Kinetics, State, StepError, Stepper};

/// Energies and masses of both species at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy_u: f64,
    pub energy_v: f64,
    pub mass_u: f64,
    pub mass_v: f64,
}

impl EnergyRecord {
    pub fn of(state: &State) -> Self {
        Self {
            t: state.t,
            energy_u: state.u.energy(),
            energy_v: state.v.energy(),
            mass_u: state.u.total_mass(),
            mass_v: state.v.total_mass(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<EnergyRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: State,
}

impl Trajectory {
    pub fn last(&self) -> &EnergyRecord {
        self.records.last().expect("trajectory has at least the initial record")
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn energies_u(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy_u).collect()
    }

    pub fn energies_v(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy_v).collect()
    }
}

/// Step size, horizon and output cadence of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePlan {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub snapshot_times: Vec<f64>,
}

impl TimePlan {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            record_every: 1,
            snapshot_times: Vec::new(),
        }
    }

    pub fn recording_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    /// Number of steps, `round(t_end / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Step index whose completion time is nearest to `t`.
    pub fn nearest_step(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.steps())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("step {step} (t = {t}) failed: {source}")]
pub struct SimulationError {
    pub step: usize,
    pub t: f64,
    pub source: StepError,
}

/// Integrates from `initial` according to `plan`. Records are taken at step 0,
/// every `record_every` steps and at the final step; snapshots at the
/// completed step nearest each requested time.
pub fn simulate<M: Kinetics>(
    stepper: &mut Stepper<M>,
    initial: State,
    plan: &TimePlan,
) -> Result<Trajectory, SimulationError> {
    let steps = plan.steps();
    let every = plan.record_every.max(1);
    let mut snap_steps: Vec<usize> = plan.snapshot_times.iter().map(|&t| plan.nearest_step(t)).collect();
    snap_steps.sort_unstable();

    let mut records = vec![EnergyRecord::of(&initial)];
    let mut snapshots = Vec::new();
    let mut next_snap = 0;
    let mut take_snapshots = |k: usize, s: &State, snapshots: &mut Vec<Snapshot>| {
        while next_snap < snap_steps.len() && snap_steps[next_snap] == k {
            snapshots.push(Snapshot {
                t: s.t,
                u: s.u.clone(),
                v: s.v.clone(),
            });
            next_snap += 1;
        }
    };
    take_snapshots(0, &initial, &mut snapshots);

    let mut state = initial;
    let t0 = state.t;
    for k in 1..=steps {
        let mut next = stepper
            .step(&state, plan.dt)
            .map_err(|source| SimulationError { step: k, t: state.t, source })?;
        // avoid accumulating round-off in the clock
        next.t = t0 + k as f64 * plan.dt;
        state = next;
        if k % every == 0 || k == steps {
            records.push(EnergyRecord::of(&state));
        }
        take_snapshots(k, &state, &mut snapshots);
    }
    Ok(Trajectory {
        records,
        snapshots,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::CoefficientSet;
    use crate::grid::Grid;
    use crate::stepper::{HarvestingModel, ModelParams, SolverSettings};

    fn run(coeffs: &CoefficientSet, params: ModelParams, plan: &TimePlan) -> Trajectory {
        let g = Grid::new(9).unwrap();
        let mut stepper = Stepper::new(HarvestingModel::new(g, coeffs, params), SolverSettings::default());
        simulate(&mut stepper, State::initial(coeffs, g).unwrap(), plan).unwrap()
    }

    #[test]
    fn no_dynamics_without_growth() {
        let c = CoefficientSet::parse("2", "0", "1", "1").unwrap();
        let traj = run(&c, ModelParams::unit_diffusion(0.3, 0.2), &TimePlan::new(0.1, 1.0));
        assert_eq!(traj.records.len(), 11);
        for r in &traj.records {
            assert!((r.energy_u - 0.5).abs() < 1e-14);
            assert!((r.energy_v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn records_and_snapshots_follow_plan() {
        let c = CoefficientSet::parse("2.1+cos(pi*x)*cos(pi*y)", "1.2", "1.8", "1.8").unwrap();
        let plan = TimePlan::new(0.1, 1.05).recording_every(3).with_snapshots(vec![0.0, 0.44, 1.6]);
        assert_eq!(plan.steps(), 11);
        let traj = run(&c, ModelParams::unit_diffusion(1.5, 0.08), &plan);
        let ts = traj.times();
        assert_eq!(ts[0], 0.0);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        let steps: Vec<usize> = ts.iter().map(|t| (t / 0.1).round() as usize).collect();
        assert_eq!(steps, vec![0, 3, 6, 9, 11]);
        let snap_t: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(snap_t.len(), 3);
        assert_eq!(snap_t[0], 0.0);
        assert!((snap_t[1] - 0.4).abs() < 1e-12);
        assert!((snap_t[2] - 1.1).abs() < 1e-12);
        assert_eq!(traj.final_state.t, traj.last().t);
    }
}
