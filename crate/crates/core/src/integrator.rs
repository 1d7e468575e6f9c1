//! Dormand–Prince 5(4) integration with PI step-size control and
//! continuous (dense) output at requested sample times.

use std::fmt;

use nalgebra::DVector;
use thiserror::Error;

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output (Hairer & Wanner, DOPRI5 `contd5`).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const UNDERFLOW_FACTOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `None` selects the step automatically.
    pub initial_step: Option<f64>,
    /// `None` means `t_end - t_start`.
    pub max_step: Option<f64>,
    pub max_rhs_evals: u64,
    /// Disables error control and steps with this constant size.
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            initial_step: None,
            max_step: None,
            max_rhs_evals: 100_000_000,
            fixed_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(ConfigError::Tolerance {
                rel: self.rel_tol,
                abs: self.abs_tol,
            });
        }
        for (name, v) in [
            ("max_step", self.max_step),
            ("initial_step", self.initial_step),
            ("fixed_step", self.fixed_step),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(ConfigError::Step { name, value: v });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("tolerances must be positive (rel = {rel}, abs = {abs})")]
    Tolerance { rel: f64, abs: f64 },
    #[error("{name} must be positive, got {value}")]
    Step { name: &'static str, value: f64 },
    #[error("sample times must be strictly increasing and finite")]
    GridOrder,
    #[error("sample grid [{first}, {last}] leaves the horizon [{start}, {end}]")]
    GridRange {
        first: f64,
        last: f64,
        start: f64,
        end: f64,
    },
    #[error("invalid horizon [{start}, {end}]")]
    Horizon { start: f64, end: f64 },
    #[error("sample grid needs at least one point")]
    EmptyGrid,
}

/// Strictly increasing sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid(Vec<f64>);

impl SampleGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, ConfigError> {
        if times.is_empty() {
            return Err(ConfigError::EmptyGrid);
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::GridOrder);
        }
        Ok(Self(times))
    }

    /// `count` points log-spaced on `[start, end]`, both ends exact. A
    /// degenerate horizon yields the single point `start`.
    pub fn log_spaced(start: f64, end: f64, count: usize) -> Result<Self, ConfigError> {
        if !(start > 0.0) || !(end >= start) {
            return Err(ConfigError::Horizon { start, end });
        }
        if end == start || count == 1 {
            return Self::new(vec![start]);
        }
        let (la, lb) = (start.ln(), end.ln());
        let last = count - 1;
        let times = (0..count)
            .map(|i| match i {
                0 => start,
                i if i == last => end,
                i => (la + (lb - la) * i as f64 / last as f64).exp(),
            })
            .collect();
        Self::new(times)
    }

    pub fn linear(start: f64, end: f64, count: usize) -> Result<Self, ConfigError> {
        if !(end >= start) || !start.is_finite() || !end.is_finite() {
            return Err(ConfigError::Horizon { start, end });
        }
        if end == start || count == 1 {
            return Self::new(vec![start]);
        }
        let last = count - 1;
        let times = (0..count)
            .map(|i| match i {
                i if i == last => end,
                i => start + (end - start) * i as f64 / last as f64,
            })
            .collect();
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    fn check_within(&self, start: f64, end: f64) -> Result<(), ConfigError> {
        let (first, last) = (self.0[0], *self.0.last().unwrap());
        if first < start || last > end {
            return Err(ConfigError::GridRange {
                first,
                last,
                start,
                end,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

/// Samples produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub samples: Vec<(f64, DVector<f64>)>,
    pub stats: StepStats,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrationErrorKind {
    Config(ConfigError),
    StepUnderflow { t: f64, step: f64 },
    MaxRhsEvals { limit: u64 },
    Rhs { t: f64, message: String },
    NonFinite { t: f64 },
}

impl fmt::Display for IntegrationErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "invalid integrator input: {e}"),
            Self::StepUnderflow { t, step } => {
                write!(f, "step size underflow at t = {t} (h = {step:e})")
            }
            Self::MaxRhsEvals { limit } => write!(f, "exceeded {limit} right-hand side evaluations"),
            Self::Rhs { t, message } => write!(f, "right-hand side failed at t = {t}: {message}"),
            Self::NonFinite { t } => write!(f, "non-finite state at t = {t}"),
        }
    }
}

/// Aborted integration; `partial` holds every sample produced before the
/// failure.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{kind}")]
pub struct IntegrationError {
    pub kind: IntegrationErrorKind,
    pub partial: Solution,
}

impl From<ConfigError> for IntegrationError {
    fn from(e: ConfigError) -> Self {
        Self {
            kind: IntegrationErrorKind::Config(e),
            partial: Solution {
                samples: Vec::new(),
                stats: StepStats::default(),
            },
        }
    }
}

struct Stepper<F> {
    rhs: F,
    stats: StepStats,
    limit: u64,
}

impl<F, E> Stepper<F>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
    E: fmt::Display,
{
    fn eval(&mut self, t: f64, z: &DVector<f64>) -> Result<DVector<f64>, IntegrationErrorKind> {
        if self.stats.rhs_evals >= self.limit {
            return Err(IntegrationErrorKind::MaxRhsEvals { limit: self.limit });
        }
        self.stats.rhs_evals += 1;
        let dz = (self.rhs)(t, z).map_err(|e| IntegrationErrorKind::Rhs {
            t,
            message: e.to_string(),
        })?;
        if dz.iter().any(|v| !v.is_finite()) {
            return Err(IntegrationErrorKind::NonFinite { t });
        }
        Ok(dz)
    }

    /// One Dormand–Prince step from `(t, z)` with derivative `k1`. Returns
    /// the new state, its derivative (FSAL) and the stage derivatives needed
    /// for error estimation and dense output.
    fn step(
        &mut self,
        t: f64,
        z: &DVector<f64>,
        k1: &DVector<f64>,
        h: f64,
    ) -> Result<StepResult, IntegrationErrorKind> {
        let k2 = self.eval(t + C2 * h, &(z + k1 * (h * A21)))?;
        let k3 = self.eval(t + C3 * h, &(z + (k1 * A31 + &k2 * A32) * h))?;
        let k4 = self.eval(t + C4 * h, &(z + (k1 * A41 + &k2 * A42 + &k3 * A43) * h))?;
        let k5 = self.eval(
            t + C5 * h,
            &(z + (k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h),
        )?;
        let k6 = self.eval(
            t + h,
            &(z + (k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h),
        )?;
        let z_new = z + (k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
        let k7 = self.eval(t + h, &z_new)?;
        let err = (k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        Ok(StepResult {
            z_new,
            k7,
            err,
            k3,
            k4,
            k5,
            k6,
        })
    }
}

struct StepResult {
    z_new: DVector<f64>,
    k7: DVector<f64>,
    err: DVector<f64>,
    k3: DVector<f64>,
    k4: DVector<f64>,
    k5: DVector<f64>,
    k6: DVector<f64>,
}

/// Fourth-order continuous extension over one accepted step.
struct DenseStep {
    t: f64,
    h: f64,
    r1: DVector<f64>,
    r2: DVector<f64>,
    r3: DVector<f64>,
    r4: DVector<f64>,
    r5: DVector<f64>,
}

impl DenseStep {
    fn new(t: f64, h: f64, z: &DVector<f64>, k1: &DVector<f64>, s: &StepResult) -> Self {
        let ydiff = &s.z_new - z;
        let bspl = k1 * h - &ydiff;
        let r4 = &ydiff - &s.k7 * h - &bspl;
        let r5 = (k1 * D1 + &s.k3 * D3 + &s.k4 * D4 + &s.k5 * D5 + &s.k6 * D6 + &s.k7 * D7) * h;
        Self {
            t,
            h,
            r1: z.clone(),
            r2: ydiff,
            r3: bspl,
            r4,
            r5,
        }
    }

    fn eval(&self, t: f64) -> DVector<f64> {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        &self.r1 + (&self.r2 + (&self.r3 + (&self.r4 + &self.r5 * th1) * th) * th1) * th
    }
}

/// Componentwise max of `|err_i| / (abs_tol + rel_tol * max(|z_i|, |z_new_i|))`.
fn error_norm(err: &DVector<f64>, z: &DVector<f64>, z_new: &DVector<f64>, cfg: &IntegratorConfig) -> f64 {
    err.iter()
        .zip(z.iter().zip(z_new.iter()))
        .map(|(e, (a, b))| e.abs() / (cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

fn initial_step<F, E>(
    stepper: &mut Stepper<F>,
    t: f64,
    z: &DVector<f64>,
    k1: &DVector<f64>,
    cfg: &IntegratorConfig,
    h_max: f64,
) -> Result<f64, IntegrationErrorKind>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
    E: fmt::Display,
{
    let scale = z.map(|v| cfg.abs_tol + cfg.rel_tol * v.abs());
    let rms = |v: &DVector<f64>| (v.component_div(&scale).norm_squared() / v.len().max(1) as f64).sqrt();
    let d0 = rms(z);
    let d1 = rms(k1);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(h_max);
    let k_probe = stepper.eval(t + h0, &(z + k1 * h0))?;
    let d2 = rms(&(&k_probe - k1)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(h_max))
}

/// Integrates `z' = rhs(t, z)` from `t_start` to `t_end` and returns the
/// state at every grid time.
///
/// Grid times equal to `t_start` return `initial` unchanged; other times are
/// filled by the continuous extension of the accepted step containing them.
pub fn integrate<F, E>(
    rhs: F,
    t_start: f64,
    t_end: f64,
    initial: &DVector<f64>,
    config: &IntegratorConfig,
    grid: &SampleGrid,
) -> Result<Solution, IntegrationError>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
    E: fmt::Display,
{
    config.validate()?;
    if !(t_end >= t_start) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(ConfigError::Horizon {
            start: t_start,
            end: t_end,
        }
        .into());
    }
    grid.check_within(t_start, t_end)?;

    let mut stepper = Stepper {
        rhs,
        stats: StepStats::default(),
        limit: config.max_rhs_evals,
    };
    let mut samples = Vec::with_capacity(grid.times().len());
    let result = run(&mut stepper, t_start, t_end, initial, config, grid, &mut samples);
    let solution = Solution {
        samples,
        stats: stepper.stats,
    };
    match result {
        Ok(()) => Ok(solution),
        Err(kind) => Err(IntegrationError {
            kind,
            partial: solution,
        }),
    }
}

fn run<F, E>(
    stepper: &mut Stepper<F>,
    t_start: f64,
    t_end: f64,
    initial: &DVector<f64>,
    cfg: &IntegratorConfig,
    grid: &SampleGrid,
    samples: &mut Vec<(f64, DVector<f64>)>,
) -> Result<(), IntegrationErrorKind>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
    E: fmt::Display,
{
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(IntegrationErrorKind::NonFinite { t: t_start });
    }
    let times = grid.times();
    let mut next = 0;
    while next < times.len() && times[next] == t_start {
        samples.push((t_start, initial.clone()));
        next += 1;
    }
    if next == times.len() {
        return Ok(());
    }

    let span = t_end - t_start;
    let h_max = cfg.max_step.unwrap_or(span).min(span);
    let mut t = t_start;
    let mut z = initial.clone();
    let mut k1 = stepper.eval(t, &z)?;
    let mut h = match (cfg.fixed_step, cfg.initial_step) {
        (Some(h), _) => h,
        (None, Some(h)) => h.min(h_max),
        (None, None) => initial_step(stepper, t, &z, &k1, cfg, h_max)?,
    };
    let mut fac_old: f64 = 1e-4;
    let expo = 0.2 - PI_BETA * 0.75;
    let mut last_rejected = false;

    while next < times.len() {
        let remaining = t_end - t;
        let last_step = h >= remaining;
        let h_try = if last_step { remaining } else { h };
        if h_try < UNDERFLOW_FACTOR * t.abs() || h_try <= 0.0 {
            return Err(IntegrationErrorKind::StepUnderflow { t, step: h_try });
        }

        let s = stepper.step(t, &z, &k1, h_try)?;

        let accepted = if cfg.fixed_step.is_some() {
            true
        } else {
            let err = error_norm(&s.err, &z, &s.z_new, cfg);
            if !err.is_finite() {
                h = h_try * FAC_MIN;
                stepper.stats.rejected += 1;
                last_rejected = true;
                continue;
            }
            let fac11 = err.powf(expo);
            if err <= 1.0 {
                let mut fac = fac11 / fac_old.powf(PI_BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = (h_try / fac).min(h_max);
                if last_rejected {
                    h_new = h_new.min(h_try);
                }
                fac_old = err.max(1e-4);
                h = h_new;
                true
            } else {
                h = h_try / (1.0 / FAC_MIN).min(fac11 / SAFETY);
                false
            }
        };

        if !accepted {
            stepper.stats.rejected += 1;
            last_rejected = true;
            continue;
        }
        stepper.stats.accepted += 1;
        last_rejected = false;

        let t_new = if last_step { t_end } else { t + h_try };
        let dense = DenseStep::new(t, h_try, &z, &k1, &s);
        while next < times.len() && times[next] <= t_new {
            let ts = times[next];
            let zs = if ts == t_new { s.z_new.clone() } else { dense.eval(ts) };
            samples.push((ts, zs));
            next += 1;
        }
        t = t_new;
        z = s.z_new;
        k1 = s.k7;
        if last_step {
            break;
        }
    }
    Ok(())
}
