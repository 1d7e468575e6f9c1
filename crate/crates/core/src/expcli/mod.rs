//! Experiment runner: configurations, single runs, sweeps, CSV/SVG output
//! and hypothesis checks.
//!
//! Exit codes: 0 success, 1 hypothesis check negative, 2 invalid
//! configuration, 3 integration aborted (partial output written), 4 I/O or
//! CSV reload failure.

pub mod config;
pub mod output;
pub mod runner;
pub mod svg;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{RunConfig, SweepConfig};
pub use runner::{cmd_check, cmd_run, cmd_sweep, RunOutcome, SweepReport, Theorem};

use config::{
    HorizonConfig, InitialConfig, IntegratorSection, OutputConfig, ParamsConfig, ProblemConfig,
    Spacing, SweepAxis, DEFAULT_SAMPLES,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed trajectory CSV: {0}")]
    Csv(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Integration(_) => 3,
            CliError::Io { .. } | CliError::Csv(_) => 4,
        }
    }
}

/// Command-line values that override a configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
}

impl Overrides {
    fn apply_parts(&self, output: &mut OutputConfig, integrator: &mut IntegratorSection) {
        if let Some(dir) = &self.out {
            output.dir = dir.clone();
        }
        if self.rel_tol.is_some() {
            integrator.rel_tol = self.rel_tol;
        }
        if self.abs_tol.is_some() {
            integrator.abs_tol = self.abs_tol;
        }
    }

    pub fn apply_run(&self, cfg: &mut RunConfig) {
        self.apply_parts(&mut cfg.output, &mut cfg.integrator);
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
    }

    pub fn apply_sweep(&self, cfg: &mut SweepConfig) {
        self.apply_parts(&mut cfg.output, &mut cfg.integrator);
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
    }
}

/// The two-variable rank-one example on `[1, 50]` with
/// `alpha = 2.5, q = 0.42, s = 0.005, p = 0.268` and
/// `x(1) = y(1) = (1, 1.5)`, `x'(1) = y'(1) = (1, 1)`, swept over `gamma`
/// and `c`.
pub fn example51_sweep(gammas: Vec<f64>, cs: Vec<f64>, out: PathBuf) -> SweepConfig {
    SweepConfig {
        problem: ProblemConfig::Example51 {
            coefficients: [1.0, 10.0, 10.0, 1.0],
        },
        params: ParamsConfig {
            alpha: 2.5,
            q: 0.42,
            s: 0.005,
            p: 0.268,
            c: cs.first().copied().unwrap_or(10.0),
            gamma: gammas.first().copied().unwrap_or(0.0),
            t0: 1.0,
        },
        integrator: IntegratorSection::default(),
        horizon: HorizonConfig {
            t_start: 1.0,
            t_end: 50.0,
            samples: DEFAULT_SAMPLES,
            spacing: Spacing::Log,
        },
        initial: InitialConfig::Explicit {
            x: vec![1.0, 1.5],
            y: vec![1.0, 1.5],
            vx: vec![1.0, 1.0],
            vy: vec![1.0, 1.0],
        },
        output: OutputConfig {
            dir: out,
            plots: true,
        },
        sweep: vec![
            SweepAxis {
                param: "gamma".into(),
                values: gammas,
            },
            SweepAxis {
                param: "c".into(),
                values: cs,
            },
        ],
    }
}

/// The seeded Gaussian regularized least-squares instance on `[1, 200]`
/// with `alpha = 3, c = 5, s = 0.4, p = 2.3, eta = 1`, swept over `q` and
/// `gamma`.
pub fn example52_sweep(
    m: usize,
    n: usize,
    seed: u64,
    qs: Vec<f64>,
    gammas: Vec<f64>,
    out: PathBuf,
) -> SweepConfig {
    SweepConfig {
        problem: ProblemConfig::Example52 {
            m,
            n,
            eta: 1.0,
            seed,
        },
        params: ParamsConfig {
            alpha: 3.0,
            q: qs.first().copied().unwrap_or(0.6),
            s: 0.4,
            p: 2.3,
            c: 5.0,
            gamma: gammas.first().copied().unwrap_or(0.0),
            t0: 1.0,
        },
        integrator: IntegratorSection::default(),
        horizon: HorizonConfig {
            t_start: 1.0,
            t_end: 200.0,
            samples: DEFAULT_SAMPLES,
            spacing: Spacing::Log,
        },
        initial: InitialConfig::Instance,
        output: OutputConfig {
            dir: out,
            plots: true,
        },
        sweep: vec![
            SweepAxis {
                param: "q".into(),
                values: qs,
            },
            SweepAxis {
                param: "gamma".into(),
                values: gammas,
            },
        ],
    }
}
