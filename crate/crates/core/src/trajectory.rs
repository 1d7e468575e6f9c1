//! Integrating a trajectory and attaching diagnostics to every sample.

use nalgebra::DVector;
use thiserror::Error;

use crate::diagnostics::{compute_row, DiagnosticsError, DiagnosticsRow};
use crate::dynamics::{phase_rhs, DynamicsError, DynamicsParams, ParamError, PhaseVector, State};
use crate::integrator::{
    integrate, IntegrationErrorKind, IntegratorConfig, SampleGrid, StepStats,
};
use crate::problem::{InitialData, ProblemSpec};

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub rows: Vec<DiagnosticsRow>,
    pub stats: StepStats,
    /// False when integration aborted before the last grid time.
    pub complete: bool,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("initial data does not match the problem: {0}")]
    Initial(DynamicsError),
    #[error("start time {t_start} precedes t0 = {t0}")]
    StartBeforeT0 { t_start: f64, t0: f64 },
    #[error("integration aborted: {kind}")]
    Integration {
        kind: IntegrationErrorKind,
        partial: Box<Trajectory>,
    },
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

fn rows_for(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    samples: &[(f64, DVector<f64>)],
) -> Result<(Vec<State>, Vec<DiagnosticsRow>), DiagnosticsError> {
    let (n, m) = (problem.n(), problem.m());
    let mut states = Vec::with_capacity(samples.len());
    let mut rows = Vec::with_capacity(samples.len());
    for (t, z) in samples {
        let state = PhaseVector(z.clone()).to_state(*t, n, m)?;
        rows.push(compute_row(problem, params, &state)?);
        states.push(state);
    }
    Ok((states, rows))
}

/// Integrates from `(x, y, x', y')` at `t_start` and evaluates a
/// [`DiagnosticsRow`] at every grid time.
pub fn simulate(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    initial: &InitialData,
    t_start: f64,
    t_end: f64,
    config: &IntegratorConfig,
    grid: &SampleGrid,
) -> Result<Trajectory, SimulationError> {
    params.validate()?;
    if t_start < params.t0 {
        return Err(SimulationError::StartBeforeT0 {
            t_start,
            t0: params.t0,
        });
    }
    let start = State {
        t: t_start,
        x: initial.x.clone(),
        y: initial.y.clone(),
        vx: initial.vx.clone(),
        vy: initial.vy.clone(),
    };
    problem
        .check_dims(&start.x, &start.y)
        .and_then(|_| problem.check_dims(&start.vx, &start.vy))
        .map_err(|e| SimulationError::Initial(e.into()))?;

    let z0 = PhaseVector::from_state(&start).0;
    let rhs = |t: f64, z: &DVector<f64>| {
        phase_rhs(problem, params, t, &PhaseVector(z.clone())).map(|d| d.0)
    };
    match integrate(rhs, t_start, t_end, &z0, config, grid) {
        Ok(sol) => {
            let (states, rows) = rows_for(problem, params, &sol.samples)?;
            Ok(Trajectory {
                states,
                rows,
                stats: sol.stats,
                complete: true,
            })
        }
        Err(err) => {
            let (states, rows) = rows_for(problem, params, &err.partial.samples)?;
            Err(SimulationError::Integration {
                kind: err.kind,
                partial: Box::new(Trajectory {
                    states,
                    rows,
                    stats: err.partial.stats,
                    complete: false,
                }),
            })
        }
    }
}
