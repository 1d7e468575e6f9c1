//! Observables along trajectories: the Tikhonov center path, primal-dual
//! gaps, both Lyapunov energies, gradient magnitudes, running integrals,
//! log-log rate fits and parameter hypothesis checks.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dynamics::{
    aug_lagrangian, grad_x_lt, grad_y_lt, theta, DynamicsError, DynamicsParams, State,
};
use crate::problem::{PrimalDual, ProblemError, ProblemSpec};

/// Relative KKT residual the center solvers must reach.
pub const CENTER_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 100;
/// Relative step of the central difference along the center path.
pub const CENTER_FD_STEP: f64 = 1e-4;
/// Minimum number of points for a fit to count as reliable.
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("center undefined: c = 0 leaves L_t without strong convexity-concavity")]
    CenterUndefined,
    #[error("Newton iteration for the Tikhonov center did not converge (residual {residual:e})")]
    NewtonFailed { residual: f64 },
    #[error("singular system while solving for the Tikhonov center")]
    SingularCenterSystem,
    #[error("no saddle anchor available")]
    MissingAnchor,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Unique saddle point `(x_t, y_t)` of `L_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovCenter {
    pub t: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub kkt_residual: f64,
}

impl TikhonovCenter {
    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.y.norm_squared()).sqrt()
    }
}

fn kkt_residual(
    problem: &ProblemSpec,
    eps: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let k = problem.coupling();
    let rx = problem.f().gradient(x) + x * eps + k.adjoint_apply(y);
    let ry = k.apply(x) - problem.g().gradient(y) - y * eps;
    (rx, ry)
}

fn residual_norm(rx: &DVector<f64>, ry: &DVector<f64>) -> f64 {
    (rx.norm_squared() + ry.norm_squared()).sqrt()
}

fn dense_hessian(f: &dyn crate::problem::SmoothConvexFn, at: &DVector<f64>) -> DMatrix<f64> {
    let n = f.dim();
    let mut h = DMatrix::zeros(n, n);
    let mut e = DVector::zeros(n);
    for j in 0..n {
        e[j] = 1.0;
        h.set_column(j, &f.hessian_vec(at, &e));
        e[j] = 0.0;
    }
    h
}

fn center_quadratic(problem: &ProblemSpec, eps: f64) -> Option<(DVector<f64>, DVector<f64>)> {
    let qf = problem.f().as_quadratic()?;
    let qg = problem.g().as_quadratic()?;
    let (n, m) = (problem.n(), problem.m());
    let k = problem.coupling().matrix();

    // y = A_y^{-1}(K x - l_g), (A_x + K^T A_y^{-1} K) x = -l_f + K^T A_y^{-1} l_g
    let a_y = qg.hessian() + DMatrix::identity(m, m) * eps;
    let chol_y = a_y.cholesky()?;
    let ay_inv_k = chol_y.solve(k);
    let ay_inv_lg = chol_y.solve(qg.linear());
    let schur = qf.hessian() + DMatrix::identity(n, n) * eps + k.tr_mul(&ay_inv_k);
    let rhs = -qf.linear() + k.tr_mul(&ay_inv_lg);
    let x = schur.cholesky()?.solve(&rhs);
    let y = &ay_inv_k * &x - ay_inv_lg;
    Some((x, y))
}

fn center_newton(
    problem: &ProblemSpec,
    eps: f64,
) -> Result<(DVector<f64>, DVector<f64>), DiagnosticsError> {
    let (n, m) = (problem.n(), problem.m());
    let k = problem.coupling().matrix();
    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(m);
    let (mut rx, mut ry) = kkt_residual(problem, eps, &x, &y);
    let mut res = residual_norm(&rx, &ry);

    for _ in 0..NEWTON_MAX_ITER {
        let scale = 1.0 + (x.norm_squared() + y.norm_squared()).sqrt();
        if res <= CENTER_TOL * scale {
            return Ok((x, y));
        }
        // Jacobian of (grad_x L_t, -grad_y L_t): [H_f + eps I, K^T; -K, H_g + eps I]
        let mut jac = DMatrix::zeros(n + m, n + m);
        jac.view_mut((0, 0), (n, n))
            .copy_from(&(dense_hessian(problem.f(), &x) + DMatrix::identity(n, n) * eps));
        jac.view_mut((0, n), (n, m)).copy_from(&k.transpose());
        jac.view_mut((n, 0), (m, n)).copy_from(&(-k));
        jac.view_mut((n, n), (m, m))
            .copy_from(&(dense_hessian(problem.g(), &y) + DMatrix::identity(m, m) * eps));
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&rx));
        rhs.rows_mut(n, m).copy_from(&ry);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(DiagnosticsError::SingularCenterSystem)?;

        let mut lambda = 1.0;
        loop {
            let xn = &x + step.rows(0, n) * lambda;
            let yn = &y + step.rows(n, m) * lambda;
            let (rxn, ryn) = kkt_residual(problem, eps, &xn, &yn);
            let resn = residual_norm(&rxn, &ryn);
            if resn <= (1.0 - 1e-4 * lambda) * res || lambda < 1e-10 {
                x = xn;
                y = yn;
                rx = rxn;
                ry = ryn;
                res = resn;
                break;
            }
            lambda *= 0.5;
        }
    }
    let scale = 1.0 + (x.norm_squared() + y.norm_squared()).sqrt();
    if res <= CENTER_TOL * scale {
        Ok((x, y))
    } else {
        Err(DiagnosticsError::NewtonFailed { residual: res })
    }
}

fn center_at(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    t: f64,
) -> Result<TikhonovCenter, DiagnosticsError> {
    if !(params.c > 0.0) {
        return Err(DiagnosticsError::CenterUndefined);
    }
    let eps = params.tikhonov_weight(t);
    let (x, y) = match center_quadratic(problem, eps) {
        Some(z) => z,
        None => center_newton(problem, eps)?,
    };
    let (rx, ry) = kkt_residual(problem, eps, &x, &y);
    Ok(TikhonovCenter {
        t,
        kkt_residual: residual_norm(&rx, &ry),
        x,
        y,
    })
}

/// Saddle point of `L_t`: a direct solve when `f` and `g` are quadratic,
/// damped Newton on the monotone optimality system otherwise.
pub fn tikhonov_center(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    t: f64,
) -> Result<TikhonovCenter, DiagnosticsError> {
    theta(params, t)?;
    center_at(problem, params, t)
}

/// Central difference of the center path with step `1e-4 t`.
pub fn tikhonov_center_velocity(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    t: f64,
) -> Result<(DVector<f64>, DVector<f64>), DiagnosticsError> {
    theta(params, t)?;
    let h = CENTER_FD_STEP * t;
    let ahead = center_at(problem, params, t + h)?;
    let behind = center_at(problem, params, t - h)?;
    Ok((
        (ahead.x - behind.x) / (2.0 * h),
        (ahead.y - behind.y) / (2.0 * h),
    ))
}

/// `L(x, y*) - L(x*, y)`.
pub fn primal_dual_gap(
    problem: &ProblemSpec,
    x: &DVector<f64>,
    y: &DVector<f64>,
    anchor: &PrimalDual,
) -> Result<f64, DiagnosticsError> {
    problem.check_dims(x, y)?;
    problem.check_dims(&anchor.x, &anchor.y)?;
    Ok(problem.lagrangian(x, &anchor.y) - problem.lagrangian(&anchor.x, y))
}

/// Hessian-damped velocity residuals
/// `x' + gamma grad_x L_t(x, y + theta y')` and `y' - gamma grad_y L_t(x + theta x', y)`.
fn damped_velocities(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
) -> Result<(DVector<f64>, DVector<f64>, f64), DiagnosticsError> {
    let (gx, gy) = extrapolated_gradients(problem, params, state)?;
    let rx = &state.vx + gx * params.gamma;
    let ry = &state.vy - gy * params.gamma;
    Ok((rx, ry, theta(params, state.t)?))
}

fn extrapolated_gradients(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
) -> Result<(DVector<f64>, DVector<f64>), DiagnosticsError> {
    let th = theta(params, state.t)?;
    let gx = grad_x_lt(problem, params, state.t, &state.x, &(&state.y + &state.vy * th))?;
    let gy = grad_y_lt(problem, params, state.t, &(&state.x + &state.vx * th), &state.y)?;
    Ok((gx, gy))
}

/// The two anchored quadratic terms shared by both energies.
fn anchored_terms(
    params: &DynamicsParams,
    t: f64,
    dx: &DVector<f64>,
    dy: &DVector<f64>,
    rx: &DVector<f64>,
    ry: &DVector<f64>,
) -> f64 {
    let a1 = params.alpha - 1.0;
    let tq = t.powf(params.q);
    let tail = 0.5 * a1 * (1.0 - params.q * t.powf(params.q - 1.0));
    let e2 = 0.5 * (dx * a1 + rx * tq).norm_squared() + tail * dx.norm_squared();
    let e3 = 0.5 * (dy * a1 + ry * tq).norm_squared() + tail * dy.norm_squared();
    e2 + e3
}

/// Lyapunov energy anchored at a fixed saddle point:
/// `w(t)(L(x,y*) - L(x*,y) + c/(2t^p)(|x|^2+|y|^2))` plus the two anchored
/// momentum/distance terms, `w(t) = t^(2q+s) - 2 gamma q t^(2q-1) + gamma t^q`.
pub fn energy_e(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
    anchor: &PrimalDual,
) -> Result<f64, DiagnosticsError> {
    let t = state.t;
    let gap = primal_dual_gap(problem, &state.x, &state.y, anchor)?;
    let reg = 0.5 * params.tikhonov_weight(t) * (state.x.norm_squared() + state.y.norm_squared());
    let e1 = params.energy_weight(t) * (gap + reg);
    let (rx, ry, _) = damped_velocities(problem, params, state)?;
    let dx = &state.x - &anchor.x;
    let dy = &state.y - &anchor.y;
    Ok(e1 + anchored_terms(params, t, &dx, &dy, &rx, &ry))
}

fn lt_gap_with_center(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
    center: &TikhonovCenter,
) -> Result<f64, DiagnosticsError> {
    let t = state.t;
    Ok(aug_lagrangian(problem, params, t, &state.x, &center.y)?
        - aug_lagrangian(problem, params, t, &center.x, &state.y)?)
}

fn energy_ehat_with_center(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
    center: &TikhonovCenter,
) -> Result<f64, DiagnosticsError> {
    let t = state.t;
    let e1 = params.energy_weight(t) * lt_gap_with_center(problem, params, state, center)?;
    let (rx, ry, _) = damped_velocities(problem, params, state)?;
    let dx = &state.x - &center.x;
    let dy = &state.y - &center.y;
    Ok(e1 + anchored_terms(params, t, &dx, &dy, &rx, &ry))
}

/// Energy anchored at the moving Tikhonov center, with `L_t` gaps.
pub fn energy_ehat(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
) -> Result<f64, DiagnosticsError> {
    let center = tikhonov_center(problem, params, state.t)?;
    energy_ehat_with_center(problem, params, state, &center)
}

/// `|grad_x L_t(x, y + theta y')|^2 + |grad_y L_t(x + theta x', y)|^2`.
pub fn delta_diag(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
) -> Result<f64, DiagnosticsError> {
    let (gx, gy) = extrapolated_gradients(problem, params, state)?;
    Ok(gx.norm_squared() + gy.norm_squared())
}

/// One sample of diagnostics. `None` marks a quantity that is not
/// applicable (no anchor known, or `c = 0` for center-based columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub gap: Option<f64>,
    pub lt_gap: Option<f64>,
    pub dist_min_norm: Option<f64>,
    pub dist_center: Option<f64>,
    pub energy_e: Option<f64>,
    pub energy_ehat: Option<f64>,
    pub delta: f64,
    pub theta: f64,
    pub speed: f64,
    pub residual_x: f64,
    pub residual_y: f64,
}

pub fn compute_row(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
) -> Result<DiagnosticsRow, DiagnosticsError> {
    let t = state.t;
    let (rx, ry, th) = damped_velocities(problem, params, state)?;
    let anchor = problem.anchor();
    let gap = anchor
        .map(|a| primal_dual_gap(problem, &state.x, &state.y, a))
        .transpose()?;
    let energy_e = anchor
        .map(|a| energy_e(problem, params, state, a))
        .transpose()?;
    let dist_min_norm = problem
        .min_norm_saddle()
        .map(|z| z.distance(&state.x, &state.y));

    let (lt_gap, dist_center, energy_ehat) = if params.c > 0.0 {
        let center = tikhonov_center(problem, params, t)?;
        let dist = ((&state.x - &center.x).norm_squared() + (&state.y - &center.y).norm_squared())
            .sqrt();
        (
            Some(lt_gap_with_center(problem, params, state, &center)?),
            Some(dist),
            Some(energy_ehat_with_center(problem, params, state, &center)?),
        )
    } else {
        (None, None, None)
    };

    Ok(DiagnosticsRow {
        t,
        gap,
        lt_gap,
        dist_min_norm,
        dist_center,
        energy_e,
        energy_ehat,
        delta: delta_diag(problem, params, state)?,
        theta: th,
        speed: state.speed(),
        residual_x: rx.norm(),
        residual_y: ry.norm(),
    })
}

/// Cumulative trapezoid rule; the first entry is 0.
pub fn cumulative_trapezoid(ts: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    if !ts.is_empty() {
        out.push(0.0);
    }
    for k in 1..ts.len() {
        acc += 0.5 * (ts[k] - ts[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

/// Integrands `t^q |(x', y')|^2` and `t^(2q+s) Delta(t)` at every row.
pub fn integrands(rows: &[DiagnosticsRow], params: &DynamicsParams) -> (Vec<f64>, Vec<f64>) {
    rows.iter()
        .map(|r| {
            (
                r.t.powf(params.q) * r.speed * r.speed,
                r.t.powf(2.0 * params.q + params.s) * r.delta,
            )
        })
        .unzip()
}

/// Running integrals of `t^q |(x', y')|^2` and `t^(2q+s) Delta(t)`.
pub fn running_integrals(
    rows: &[DiagnosticsRow],
    params: &DynamicsParams,
) -> Result<(Vec<f64>, Vec<f64>), DiagnosticsError> {
    if rows.len() < 2 {
        return Err(DiagnosticsError::TooFewSamples {
            needed: 2,
            got: rows.len(),
        });
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let (speed, delta) = integrands(rows, params);
    Ok((cumulative_trapezoid(&ts, &speed), cumulative_trapezoid(&ts, &delta)))
}

/// Integral of a sampled integrand over `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicWindow {
    pub start: f64,
    pub end: f64,
    pub increment: f64,
}

fn interpolate(ts: &[f64], values: &[f64], t: f64) -> f64 {
    match ts.iter().position(|&s| s >= t) {
        Some(0) => values[0],
        Some(k) => {
            let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
            values[k - 1] + w * (values[k] - values[k - 1])
        }
        None => *values.last().unwrap(),
    }
}

/// Trapezoid integral of the piecewise-linear interpolant on `[a, b]`.
fn window_trapezoid(ts: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    let mut knots = vec![(a, interpolate(ts, values, a))];
    knots.extend(
        ts.iter()
            .zip(values)
            .filter(|(t, _)| **t > a && **t < b)
            .map(|(t, v)| (*t, *v)),
    );
    knots.push((b, interpolate(ts, values, b)));
    knots
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1))
        .sum()
}

/// Integrals of `integrand` over `[t_first 2^k, t_first 2^(k+1)]`, the last
/// window truncated at the final sample time. Each window is summed on its
/// own rather than differenced from a running total, so small tail
/// increments keep their relative precision.
pub fn dyadic_increments(ts: &[f64], integrand: &[f64]) -> Vec<DyadicWindow> {
    let (Some(&first), Some(&last)) = (ts.first(), ts.last()) else {
        return Vec::new();
    };
    let mut windows = Vec::new();
    let mut start = first;
    while start < last {
        let end = (2.0 * start).min(last);
        windows.push(DyadicWindow {
            start,
            end,
            increment: window_trapezoid(ts, integrand, start, end),
        });
        start *= 2.0;
    }
    windows
}

/// Windows in the logarithmic second half of the horizon: those starting at
/// or after `sqrt(t_first t_last)`.
pub fn tail_windows(windows: &[DyadicWindow]) -> &[DyadicWindow] {
    let (Some(first), Some(last)) = (windows.first(), windows.last()) else {
        return windows;
    };
    let pivot = (first.start * last.end).sqrt();
    let k = windows
        .iter()
        .position(|w| w.start >= pivot)
        .unwrap_or(windows.len());
    &windows[k..]
}

pub fn strictly_decreasing(windows: &[DyadicWindow]) -> bool {
    windows.windows(2).all(|w| w[1].increment < w[0].increment)
}

/// Maximum of `values` over samples with `lo <= t <= hi`.
pub fn window_max(ts: &[f64], values: &[f64], lo: f64, hi: f64) -> Option<f64> {
    ts.iter()
        .zip(values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(_, v)| *v)
        .reduce(f64::max)
}

/// Ratio of the maximum over the final dyadic window `[t_end/2, t_end]` to the
/// maximum over the first `[t_start, 2 t_start]`.
pub fn tail_to_head_ratio(ts: &[f64], values: &[f64]) -> Option<f64> {
    let (first, last) = (*ts.first()?, *ts.last()?);
    let head = window_max(ts, values, first, 2.0 * first)?;
    let tail = window_max(ts, values, 0.5 * last, last)?;
    Some(tail / head)
}

/// Least-squares line through `(log t, log v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub skipped_nonpositive: usize,
    pub reliable: bool,
}

/// Fits `log v = slope log t + intercept` over the last `tail_fraction` of the
/// samples (by count). Samples with `v <= 0` are skipped and counted.
pub fn fit_rate(series: &[(f64, f64)], tail_fraction: f64) -> RateFit {
    let frac = tail_fraction.clamp(0.0, 1.0);
    let take = ((series.len() as f64) * frac).ceil() as usize;
    let tail = &series[series.len() - take.min(series.len())..];
    let window = (
        tail.first().map_or(f64::NAN, |p| p.0),
        tail.last().map_or(f64::NAN, |p| p.0),
    );
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(t, v)| *t > 0.0 && *v > 0.0 && v.is_finite())
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let skipped = tail.len() - pts.len();
    let n = pts.len();
    if n < 2 {
        return RateFit {
            window,
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: 0.0,
            points_used: n,
            skipped_nonpositive: skipped,
            reliable: false,
        };
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if syy <= f64::EPSILON * nf * (1.0 + my * my) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    RateFit {
        window,
        slope,
        intercept,
        r_squared,
        points_used: n,
        skipped_nonpositive: skipped,
        reliable: n >= MIN_FIT_POINTS && sxx > 0.0,
    }
}

/// Sign-split case of the strong convergence rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateCase {
    /// `q + 2p >= 1`
    Slow,
    /// `q + 2p < 1`
    Fast,
}

impl RateCase {
    pub fn label(self) -> &'static str {
        match self {
            RateCase::Slow => "q+2p>=1",
            RateCase::Fast => "q+2p<1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub base_ok: bool,
    /// `alpha - 1, q, 1 - q, s, t0 - (gamma q)^(1/(s+1))`
    pub base_margins: [f64; 5],
    pub thm31_ok: bool,
    /// `s - max(0, p - 2), p - q - s - 1`
    pub thm31_margins: [f64; 2],
    pub thm42_ok: bool,
    /// `p, 1 - p, 2q + s - p, 2 - 4q - s - p, 1 + p - 3q - s`
    pub thm42_margins: [f64; 5],
    pub case: RateCase,
    /// Rate exponent of the rate-bearing gap `O(1/t^k)` under the fixed-anchor theorem.
    pub gap_rate: f64,
    /// Rate exponent of the `L_t` gap under the strong convergence theorem.
    pub lt_gap_rate: f64,
    /// Rate exponent of `|x - x_t| + |y - y_t|` under the strong convergence theorem.
    pub center_distance_rate: f64,
}

impl HypothesisReport {
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("base_ok".to_string(), self.base_ok.to_string()),
            ("thm31_ok".to_string(), self.thm31_ok.to_string()),
        ];
        for (name, v) in ["s_minus_max0_pminus2", "p_minus_q_minus_s_minus_1"]
            .iter()
            .zip(self.thm31_margins)
        {
            kv.push((format!("thm31_margin_{name}"), format!("{v}")));
        }
        kv.push(("thm42_ok".to_string(), self.thm42_ok.to_string()));
        for (name, v) in [
            "p",
            "1_minus_p",
            "2q_plus_s_minus_p",
            "2_minus_4q_minus_s_minus_p",
            "1_plus_p_minus_3q_minus_s",
        ]
        .iter()
        .zip(self.thm42_margins)
        {
            kv.push((format!("thm42_margin_{name}"), format!("{v}")));
        }
        kv.push(("case".to_string(), self.case.label().to_string()));
        kv.push(("gap_rate".to_string(), format!("{}", self.gap_rate)));
        kv.push(("lt_gap_rate".to_string(), format!("{}", self.lt_gap_rate)));
        kv.push((
            "center_distance_rate".to_string(),
            format!("{}", self.center_distance_rate),
        ));
        kv
    }
}

/// Evaluates every parameter hypothesis with its margin; a hypothesis holds
/// when all its margins are strictly positive.
pub fn check_hypotheses(params: &DynamicsParams) -> HypothesisReport {
    let DynamicsParams {
        alpha,
        q,
        s,
        p,
        gamma,
        t0,
        ..
    } = *params;
    let t0_margin = if gamma > 0.0 {
        t0 - params.t0_lower_bound()
    } else {
        t0
    };
    let base_margins = [alpha - 1.0, q, 1.0 - q, s, t0_margin];
    let thm31_margins = [s - (p - 2.0).max(0.0), p - q - s - 1.0];
    let thm42_margins = [
        p,
        1.0 - p,
        2.0 * q + s - p,
        2.0 - 4.0 * q - s - p,
        1.0 + p - 3.0 * q - s,
    ];
    let all_pos = |m: &[f64]| m.iter().all(|v| *v > 0.0);
    let case = if q + 2.0 * p >= 1.0 {
        RateCase::Slow
    } else {
        RateCase::Fast
    };
    let (lt_gap_rate, center_distance_rate) = match case {
        RateCase::Slow => (2.0 - 2.0 * q - p, 1.0 - 2.0 * q - 0.5 * (s + p)),
        RateCase::Fast => (1.0 - q + p, 0.5 * (1.0 + p - s) - 1.5 * q),
    };
    HypothesisReport {
        base_ok: all_pos(&base_margins),
        base_margins,
        thm31_ok: all_pos(&thm31_margins),
        thm31_margins,
        thm42_ok: all_pos(&thm42_margins),
        thm42_margins,
        case,
        gap_rate: 2.0 * q + s,
        lt_gap_rate,
        center_distance_rate,
    }
}

/// `Phi(x(t)) - Phi(x*)` for each state, where `Phi` is the primal objective
/// with the dual variable eliminated. `None` when no saddle point is known
/// or `g` is not a strongly convex quadratic.
pub fn objective_error_series(problem: &ProblemSpec, states: &[State]) -> Option<Vec<f64>> {
    let star = problem.saddle_point()?;
    let phi_star = problem.primal_value(&star.x)?;
    states
        .iter()
        .map(|s| problem.primal_value(&s.x).map(|v| v - phi_star))
        .collect()
}

/// Number of strict interior local maxima.
pub fn count_strict_local_maxima(values: &[f64]) -> usize {
    values
        .windows(3)
        .filter(|w| w[1] > w[0] && w[1] > w[2])
        .count()
}

/// `sum_k |v_{k+1} - v_k|`.
pub fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
