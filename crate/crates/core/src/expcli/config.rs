//! TOML run and sweep configurations.
//!
//! ```toml
//! [problem]
//! kind = "example51"            # example51 | example52 | quadratic
//! coefficients = [1.0, 10.0, 10.0, 1.0]
//!
//! [params]
//! alpha = 2.5
//! q = 0.42
//! s = 0.005
//! p = 0.268
//! c = 10.0
//! gamma = 0.8
//! t0 = 1.0
//!
//! [integrator]                  # all keys optional
//! rel_tol = 1e-6
//! abs_tol = 1e-9
//!
//! [horizon]
//! t_start = 1.0
//! t_end = 50.0
//! samples = 200                 # optional, default 200
//! spacing = "log"               # log | linear
//!
//! [initial]
//! kind = "explicit"             # explicit | random | instance
//! x = [1.0, 1.5]
//! y = [1.0, 1.5]
//! vx = [1.0, 1.0]
//! vy = [1.0, 1.0]
//!
//! [output]
//! dir = "out/example51"
//! plots = true
//!
//! [[sweep]]                     # sweep files only, at most two axes
//! param = "gamma"
//! values = [0.0, 0.8]
//! ```
//!
//! `example52` takes `m`, `n`, `eta` and `seed`; `quadratic` takes
//! `f_hessian`, `g_hessian`, `coupling` (row lists), optional `f_linear`,
//! `g_linear`, `saddle_x`/`saddle_y` and `min_norm_x`/`min_norm_y`.
//! `initial.kind = "instance"` uses the data drawn with an `example52`
//! instance, `random` draws standard normals from `initial.seed`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::CliError;
use crate::dynamics::DynamicsParams;
use crate::integrator::{IntegratorConfig, SampleGrid};
use crate::problem::{
    make_example_51, make_random_instance, GaussianStream, InitialData, LinearCoupling,
    PrimalDual, ProblemSpec, Quadratic,
};

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 2024;
pub const MAX_SWEEP_AXES: usize = 2;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemConfig {
    Example51 {
        #[serde(default = "example51_coefficients")]
        coefficients: [f64; 4],
    },
    Example52 {
        m: usize,
        n: usize,
        #[serde(default = "one")]
        eta: f64,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Quadratic {
        f_hessian: Vec<Vec<f64>>,
        #[serde(default)]
        f_linear: Option<Vec<f64>>,
        g_hessian: Vec<Vec<f64>>,
        #[serde(default)]
        g_linear: Option<Vec<f64>>,
        coupling: Vec<Vec<f64>>,
        #[serde(default)]
        saddle_x: Option<Vec<f64>>,
        #[serde(default)]
        saddle_y: Option<Vec<f64>>,
        #[serde(default)]
        min_norm_x: Option<Vec<f64>>,
        #[serde(default)]
        min_norm_y: Option<Vec<f64>>,
    },
}

fn example51_coefficients() -> [f64; 4] {
    [1.0, 10.0, 10.0, 1.0]
}

fn one() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub alpha: f64,
    pub q: f64,
    pub s: f64,
    pub p: f64,
    pub c: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub t0: f64,
}

impl ParamsConfig {
    pub fn to_params(self) -> DynamicsParams {
        DynamicsParams {
            alpha: self.alpha,
            q: self.q,
            s: self.s,
            p: self.p,
            c: self.c,
            gamma: self.gamma,
            t0: self.t0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub max_rhs_evals: Option<u64>,
    pub fixed_step: Option<f64>,
}

impl IntegratorSection {
    pub fn to_config(self) -> IntegratorConfig {
        let d = IntegratorConfig::default();
        IntegratorConfig {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            initial_step: self.initial_step,
            max_step: self.max_step,
            max_rhs_evals: self.max_rhs_evals.unwrap_or(d.max_rhs_evals),
            fixed_step: self.fixed_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    Explicit {
        x: Vec<f64>,
        y: Vec<f64>,
        vx: Vec<f64>,
        vy: Vec<f64>,
    },
    Random {
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Instance,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub plots: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            plots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    pub horizon: HorizonConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: ProblemConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    pub horizon: HorizonConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Vec<SweepAxis>,
}

/// Everything a single run needs, fully validated.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub problem: ProblemSpec,
    pub params: DynamicsParams,
    pub initial: InitialData,
    pub integrator: IntegratorConfig,
    pub t_start: f64,
    pub t_end: f64,
    pub grid: SampleGrid,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(invalid(format!("{name} must be a non-empty rectangular matrix")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn vector_or_zero(v: &Option<Vec<f64>>, len: usize) -> DVector<f64> {
    v.as_ref()
        .map_or_else(|| DVector::zeros(len), |v| DVector::from_column_slice(v))
}

fn optional_point(
    x: &Option<Vec<f64>>,
    y: &Option<Vec<f64>>,
    what: &str,
) -> Result<Option<PrimalDual>, CliError> {
    match (x, y) {
        (Some(x), Some(y)) => Ok(Some(PrimalDual::new(
            DVector::from_column_slice(x),
            DVector::from_column_slice(y),
        ))),
        (None, None) => Ok(None),
        _ => Err(invalid(format!("{what}_x and {what}_y must be given together"))),
    }
}

impl ProblemConfig {
    /// Builds the problem and, for `example52`, the initial data drawn with it.
    pub fn build(&self) -> Result<(ProblemSpec, Option<InitialData>), CliError> {
        match self {
            ProblemConfig::Example51 { coefficients: [a, b, c, d] } => {
                Ok((make_example_51(*a, *b, *c, *d), None))
            }
            ProblemConfig::Example52 { m, n, eta, seed } => {
                let (p, init) = make_random_instance(*m, *n, *eta, *seed)
                    .map_err(|e| invalid(e.to_string()))?;
                Ok((p, Some(init)))
            }
            ProblemConfig::Quadratic {
                f_hessian,
                f_linear,
                g_hessian,
                g_linear,
                coupling,
                saddle_x,
                saddle_y,
                min_norm_x,
                min_norm_y,
            } => {
                let hf = matrix("f_hessian", f_hessian)?;
                let hg = matrix("g_hessian", g_hessian)?;
                let k = matrix("coupling", coupling)?;
                let lf = vector_or_zero(f_linear, hf.nrows());
                let lg = vector_or_zero(g_linear, hg.nrows());
                let err = |e: crate::problem::ProblemError| invalid(e.to_string());
                let f = Quadratic::new(hf, lf).map_err(err)?;
                let g = Quadratic::new(hg, lg).map_err(err)?;
                let mut spec = ProblemSpec::new(Arc::new(f), Arc::new(g), LinearCoupling::new(k))
                    .map_err(err)?;
                if let Some(pt) = optional_point(saddle_x, saddle_y, "saddle")? {
                    spec = spec.with_saddle_point(pt).map_err(err)?;
                }
                if let Some(pt) = optional_point(min_norm_x, min_norm_y, "min_norm")? {
                    spec = spec.with_min_norm_saddle(pt).map_err(err)?;
                }
                Ok((spec, None))
            }
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&read(path)?)
    }

    /// Replaces every seed in the configuration.
    pub fn set_seed(&mut self, new_seed: u64) {
        if let ProblemConfig::Example52 { seed, .. } = &mut self.problem {
            *seed = new_seed;
        }
        if let InitialConfig::Random { seed } = &mut self.initial {
            *seed = new_seed;
        }
    }

    /// Validates every section and materializes the run.
    pub fn prepare(&self) -> Result<PreparedRun, CliError> {
        let params = self.params.to_params();
        params.validate().map_err(|e| invalid(e.to_string()))?;
        let integrator = self.integrator.to_config();
        integrator.validate().map_err(|e| invalid(e.to_string()))?;

        let HorizonConfig {
            t_start,
            t_end,
            samples,
            spacing,
        } = self.horizon;
        if !(t_start.is_finite() && t_end.is_finite()) || t_end < t_start {
            return Err(invalid(format!("invalid horizon [{t_start}, {t_end}]")));
        }
        if t_start < params.t0 {
            return Err(invalid(format!(
                "t_start >= t0 violated (t_start = {t_start}, t0 = {})",
                params.t0
            )));
        }
        if samples == 0 {
            return Err(invalid("horizon.samples must be at least 1"));
        }
        let grid = match spacing {
            Spacing::Log => SampleGrid::log_spaced(t_start, t_end, samples),
            Spacing::Linear => SampleGrid::linear(t_start, t_end, samples),
        }
        .map_err(|e| invalid(e.to_string()))?;

        let (problem, drawn) = self.problem.build()?;
        let initial = match &self.initial {
            InitialConfig::Explicit { x, y, vx, vy } => InitialData {
                x: DVector::from_column_slice(x),
                y: DVector::from_column_slice(y),
                vx: DVector::from_column_slice(vx),
                vy: DVector::from_column_slice(vy),
            },
            InitialConfig::Random { seed } => {
                let mut stream = GaussianStream::new(*seed);
                InitialData {
                    x: stream.vector(problem.n()),
                    y: stream.vector(problem.m()),
                    vx: stream.vector(problem.n()),
                    vy: stream.vector(problem.m()),
                }
            }
            InitialConfig::Instance => drawn.ok_or_else(|| {
                invalid("initial.kind = \"instance\" requires an example52 problem")
            })?,
        };
        problem
            .check_dims(&initial.x, &initial.y)
            .and_then(|_| problem.check_dims(&initial.vx, &initial.vy))
            .map_err(|e| invalid(format!("initial data: {e}")))?;
        let finite = |v: &DVector<f64>| v.iter().all(|a| a.is_finite());
        if ![&initial.x, &initial.y, &initial.vx, &initial.vy]
            .into_iter()
            .all(finite)
        {
            return Err(invalid("initial data must be finite"));
        }

        Ok(PreparedRun {
            problem,
            params,
            initial,
            integrator,
            t_start,
            t_end,
            grid,
        })
    }
}

/// Names accepted by [`SweepAxis::param`].
pub const SWEEPABLE: [&str; 8] = ["alpha", "q", "s", "p", "c", "gamma", "t0", "seed"];

/// One grid point: a label such as `gamma=0.8_c=10` and its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub label: String,
    pub assignments: Vec<(String, f64)>,
    pub config: RunConfig,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&read(path)?)
    }

    /// The run configuration every grid point starts from.
    pub fn base(&self) -> RunConfig {
        RunConfig {
            problem: self.problem.clone(),
            params: self.params,
            integrator: self.integrator,
            horizon: self.horizon,
            initial: self.initial.clone(),
            output: self.output.clone(),
        }
    }

    pub fn set_seed(&mut self, new_seed: u64) {
        let mut base = self.base();
        base.set_seed(new_seed);
        self.problem = base.problem;
        self.initial = base.initial;
    }

    /// Cartesian product of the axes, first axis outermost. Every point is
    /// validated individually.
    pub fn grid(&self) -> Result<Vec<GridPoint>, CliError> {
        if self.sweep.is_empty() || self.sweep.len() > MAX_SWEEP_AXES {
            return Err(invalid(format!(
                "a sweep needs one or two axes, got {}",
                self.sweep.len()
            )));
        }
        for axis in &self.sweep {
            if !SWEEPABLE.contains(&axis.param.as_str()) {
                return Err(invalid(format!(
                    "unknown sweep parameter {:?} (expected one of {})",
                    axis.param,
                    SWEEPABLE.join(", ")
                )));
            }
            if axis.values.is_empty() {
                return Err(invalid(format!("sweep axis {} has no values", axis.param)));
            }
        }
        if self.sweep.len() == 2 && self.sweep[0].param == self.sweep[1].param {
            return Err(invalid("sweep axes must name different parameters"));
        }

        let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for axis in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push((axis.param.clone(), *v));
                        p
                    })
                })
                .collect();
        }

        points
            .into_iter()
            .map(|assignments| {
                let mut config = self.base();
                for (name, v) in &assignments {
                    apply(&mut config, name, *v)?;
                }
                let label = assignments
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join("_");
                config.output.dir = self.output.dir.join(&label);
                config
                    .prepare()
                    .map_err(|e| invalid(format!("grid point {label}: {e}")))?;
                Ok(GridPoint {
                    label,
                    assignments,
                    config,
                })
            })
            .collect()
    }
}

fn apply(config: &mut RunConfig, name: &str, value: f64) -> Result<(), CliError> {
    let p = &mut config.params;
    match name {
        "alpha" => p.alpha = value,
        "q" => p.q = value,
        "s" => p.s = value,
        "p" => p.p = value,
        "c" => p.c = value,
        "gamma" => p.gamma = value,
        "t0" => p.t0 = value,
        "seed" => {
            if !(value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                return Err(invalid(format!("seed must be a non-negative integer, got {value}")));
            }
            config.set_seed(value as u64);
        }
        other => return Err(invalid(format!("unknown sweep parameter {other:?}"))),
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
