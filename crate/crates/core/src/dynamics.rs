//! Right-hand side of the Hessian-damped, Tikhonov-regularized primal-dual
//! system
//!
//! ```text
//! x'' + (alpha/t^q) x' + gamma d/dt[grad_x L_t(x, y + theta y')] + t^s grad_x L_t(x, y + theta y') = 0
//! y'' + (alpha/t^q) y' - gamma d/dt[grad_y L_t(x + theta x', y)] - t^s grad_y L_t(x + theta x', y) = 0
//! ```
//!
//! with `L_t(x, y) = L(x, y) + c/(2 t^p) (|x|^2 - |y|^2)`.
//!
//! Expanding the total derivatives puts `gamma theta K^T y''` into the first
//! equation and `-gamma theta K x''` into the second, so the accelerations
//! solve a block system `[I, gamma theta K^T; -gamma theta K, I]`. That
//! matrix is identity plus skew, and its Schur complement
//! `I + gamma^2 theta^2 K^T K` is symmetric positive definite.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problem::{ProblemError, ProblemSpec};

/// Primal dimension above which the Schur system is solved by conjugate
/// gradients instead of a dense Cholesky factorization.
pub const DENSE_SCHUR_MAX_DIM: usize = 512;
pub const CG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("alpha > 1 violated (alpha = {0})")]
    Alpha(f64),
    #[error("0 < q < 1 violated (q = {0})")]
    Q(f64),
    #[error("s > 0 violated (s = {0})")]
    S(f64),
    #[error("p > 0 violated (p = {0})")]
    P(f64),
    #[error("c >= 0 violated (c = {0})")]
    C(f64),
    #[error("gamma >= 0 violated (gamma = {0})")]
    Gamma(f64),
    #[error("t0 > 0 violated (t0 = {0})")]
    T0Positive(f64),
    #[error("t0 > (gamma q)^(1/(s+1)) violated (t0 = {t0}, bound = {bound})")]
    T0Bound { t0: f64, bound: f64 },
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("time {t} is before t0 = {t0}")]
    Domain { t: f64, t0: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("Schur system solve failed at t = {t} (condition estimate {condition:e})")]
    SchurSolve { t: f64, condition: f64 },
    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error("phase vector has length {got}, expected {expected}")]
    PhaseLength { got: usize, expected: usize },
}

/// Scalar parameters `(alpha, q, s, p, c, gamma, t0)`.
///
/// Fields are public so hypothesis checks can inspect arbitrary tuples;
/// everything that integrates calls [`DynamicsParams::validate`] first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub alpha: f64,
    pub q: f64,
    pub s: f64,
    pub p: f64,
    pub c: f64,
    pub gamma: f64,
    pub t0: f64,
}

impl DynamicsParams {
    pub fn new(
        alpha: f64,
        q: f64,
        s: f64,
        p: f64,
        c: f64,
        gamma: f64,
        t0: f64,
    ) -> Result<Self, ParamError> {
        let params = Self {
            alpha,
            q,
            s,
            p,
            c,
            gamma,
            t0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Lower bound `(gamma q)^(1/(s+1))` that `t0` must exceed when `gamma > 0`.
    pub fn t0_lower_bound(&self) -> f64 {
        (self.gamma * self.q).powf(1.0 / (self.s + 1.0))
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha > 1.0) {
            return Err(ParamError::Alpha(self.alpha));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(ParamError::Q(self.q));
        }
        if !(self.s > 0.0) {
            return Err(ParamError::S(self.s));
        }
        if !(self.p > 0.0) {
            return Err(ParamError::P(self.p));
        }
        if !(self.c >= 0.0) {
            return Err(ParamError::C(self.c));
        }
        if !(self.gamma >= 0.0) {
            return Err(ParamError::Gamma(self.gamma));
        }
        if !(self.t0 > 0.0) {
            return Err(ParamError::T0Positive(self.t0));
        }
        if self.gamma > 0.0 && !(self.t0 > self.t0_lower_bound()) {
            return Err(ParamError::T0Bound {
                t0: self.t0,
                bound: self.t0_lower_bound(),
            });
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<(), DynamicsError> {
        if t < self.t0 || !t.is_finite() {
            return Err(DynamicsError::Domain { t, t0: self.t0 });
        }
        Ok(())
    }

    /// Tikhonov weight `c / t^p`.
    pub fn tikhonov_weight(&self, t: f64) -> f64 {
        self.c / t.powf(self.p)
    }

    /// Leading energy coefficient `t^(2q+s) - 2 gamma q t^(2q-1) + gamma t^q`,
    /// which is also the numerator of `theta`.
    pub fn energy_weight(&self, t: f64) -> f64 {
        let q = self.q;
        t.powf(2.0 * q + self.s) - 2.0 * self.gamma * q * t.powf(2.0 * q - 1.0)
            + self.gamma * t.powf(q)
    }

    fn theta_denominator(&self, t: f64) -> f64 {
        let q = self.q;
        (self.alpha - 1.0) * (t.powf(q + self.s) - self.gamma * q * t.powf(q - 1.0))
    }
}

/// Extrapolation coefficient
/// `theta(t) = (t^(2q+s) - 2 gamma q t^(2q-1) + gamma t^q) / ((alpha-1)(t^(q+s) - gamma q t^(q-1)))`.
pub fn theta(params: &DynamicsParams, t: f64) -> Result<f64, DynamicsError> {
    params.check_time(t)?;
    Ok(params.energy_weight(t) / params.theta_denominator(t))
}

/// Analytic derivative of [`theta`] by the quotient rule.
pub fn theta_dot(params: &DynamicsParams, t: f64) -> Result<f64, DynamicsError> {
    params.check_time(t)?;
    let DynamicsParams {
        alpha, q, s, gamma, ..
    } = *params;
    let num = params.energy_weight(t);
    let den = params.theta_denominator(t);
    let num_dot = (2.0 * q + s) * t.powf(2.0 * q + s - 1.0)
        - 2.0 * gamma * q * (2.0 * q - 1.0) * t.powf(2.0 * q - 2.0)
        + gamma * q * t.powf(q - 1.0);
    let den_dot =
        (alpha - 1.0) * ((q + s) * t.powf(q + s - 1.0) - gamma * q * (q - 1.0) * t.powf(q - 2.0));
    Ok((num_dot * den - num * den_dot) / (den * den))
}

/// `L_t(x, y) = f(x) + <Kx, y> - g(y) + c/(2 t^p) (|x|^2 - |y|^2)`.
pub fn aug_lagrangian(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    t: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<f64, DynamicsError> {
    params.check_time(t)?;
    problem.check_dims(x, y)?;
    let eps = params.tikhonov_weight(t);
    Ok(problem.lagrangian(x, y) + 0.5 * eps * (x.norm_squared() - y.norm_squared()))
}

/// `grad_x L_t(x, y) = grad f(x) + (c/t^p) x + K^T y`.
pub fn grad_x_lt(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    t: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    params.check_time(t)?;
    problem.check_dims(x, y)?;
    let eps = params.tikhonov_weight(t);
    Ok(problem.f().gradient(x) + x * eps + problem.coupling().adjoint_apply(y))
}

/// `grad_y L_t(x, y) = K x - grad g(y) - (c/t^p) y`.
pub fn grad_y_lt(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    t: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    params.check_time(t)?;
    problem.check_dims(x, y)?;
    let eps = params.tikhonov_weight(t);
    Ok(problem.coupling().apply(x) - problem.g().gradient(y) - y * eps)
}

/// Point `(t, x, y, x', y')` of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub vx: DVector<f64>,
    pub vy: DVector<f64>,
}

impl State {
    pub fn is_finite(&self) -> bool {
        [&self.x, &self.y, &self.vx, &self.vy]
            .iter()
            .all(|v| v.iter().all(|e| e.is_finite()))
    }

    /// `sqrt(|x'|^2 + |y'|^2)`.
    pub fn speed(&self) -> f64 {
        (self.vx.norm_squared() + self.vy.norm_squared()).sqrt()
    }
}

/// Flat first-order form `[x | y | x' | y']` of length `2(n+m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(pub DVector<f64>);

impl PhaseVector {
    pub fn from_state(state: &State) -> Self {
        let (n, m) = (state.x.len(), state.y.len());
        let mut z = DVector::zeros(2 * (n + m));
        z.rows_mut(0, n).copy_from(&state.x);
        z.rows_mut(n, m).copy_from(&state.y);
        z.rows_mut(n + m, n).copy_from(&state.vx);
        z.rows_mut(2 * n + m, m).copy_from(&state.vy);
        Self(z)
    }

    pub fn to_state(&self, t: f64, n: usize, m: usize) -> Result<State, DynamicsError> {
        let z = &self.0;
        if z.len() != 2 * (n + m) {
            return Err(DynamicsError::PhaseLength {
                got: z.len(),
                expected: 2 * (n + m),
            });
        }
        Ok(State {
            t,
            x: z.rows(0, n).into_owned(),
            y: z.rows(n, m).into_owned(),
            vx: z.rows(n + m, n).into_owned(),
            vy: z.rows(2 * n + m, m).into_owned(),
        })
    }
}

/// Right-hand sides `F_x`, `F_y` of the block system together with the
/// coefficient `gamma theta` of its off-diagonal blocks.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub coupling_scale: f64,
    pub fx: DVector<f64>,
    pub fy: DVector<f64>,
}

/// Assembles the block system `[I, a K^T; -a K, I] [x''; y''] = [F_x; F_y]`
/// with `a = gamma theta`.
pub fn block_system(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
) -> Result<BlockSystem, DynamicsError> {
    let t = state.t;
    params.check_time(t)?;
    problem.check_dims(&state.x, &state.y)?;
    problem.check_dims(&state.vx, &state.vy)?;
    let State { x, y, vx, vy, .. } = state;
    let DynamicsParams {
        alpha,
        q,
        s,
        p,
        c,
        gamma,
        ..
    } = *params;

    let th = theta(params, t)?;
    let friction = alpha / t.powf(q);
    let scale = t.powf(s);

    let y_ext = y + vy * th;
    let x_ext = x + vx * th;
    let gx = grad_x_lt(problem, params, t, x, &y_ext)?;
    let gy = grad_y_lt(problem, params, t, &x_ext, y)?;

    let mut fx = -(vx * friction) - gx * scale;
    let mut fy = -(vy * friction) + gy * scale;

    if gamma != 0.0 {
        let th_dot = theta_dot(params, t)?;
        let eps = params.tikhonov_weight(t);
        let eps_dot = c * p / t.powf(p + 1.0);
        let k = problem.coupling();
        let hx = problem.f().hessian_vec(x, vx) + vx * eps - x * eps_dot
            + k.adjoint_apply(vy) * (1.0 + th_dot);
        let hy = k.apply(vx) * (1.0 + th_dot) - problem.g().hessian_vec(y, vy) - vy * eps
            + y * eps_dot;
        fx -= hx * gamma;
        fy += hy * gamma;
    }

    Ok(BlockSystem {
        coupling_scale: gamma * th,
        fx,
        fy,
    })
}

/// Accelerations `(x'', y'')` at `state`.
///
/// Solves `(I + a^2 K^T K) x'' = F_x - a K^T F_y`, then `y'' = F_y + a K x''`
/// with `a = gamma theta`.
pub fn accelerations(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    state: &State,
) -> Result<(DVector<f64>, DVector<f64>), DynamicsError> {
    let system = block_system(problem, params, state)?;
    let a = system.coupling_scale;
    let k = problem.coupling();

    let (ax, ay) = if a == 0.0 || k.op_norm_estimate() == 0.0 {
        (system.fx, system.fy)
    } else {
        let rhs = &system.fx - k.adjoint_apply(&system.fy) * a;
        let ax = solve_schur(problem, a, &rhs, state.t)?;
        let ay = &system.fy + k.apply(&ax) * a;
        (ax, ay)
    };

    if ax.iter().chain(ay.iter()).any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFinite {
            what: "accelerations",
            t: state.t,
        });
    }
    Ok((ax, ay))
}

fn solve_schur(
    problem: &ProblemSpec,
    a: f64,
    rhs: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>, DynamicsError> {
    let n = problem.n();
    let a2 = a * a;
    let condition = 1.0 + a2 * problem.coupling().op_norm_estimate().powi(2);
    if n <= DENSE_SCHUR_MAX_DIM {
        let mut schur = problem.gram() * a2;
        for i in 0..n {
            schur[(i, i)] += 1.0;
        }
        schur
            .cholesky()
            .map(|chol| chol.solve(rhs))
            .ok_or(DynamicsError::SchurSolve { t, condition })
    } else {
        let k = problem.coupling();
        conjugate_gradient(
            |v| v + k.adjoint_apply(&k.apply(v)) * a2,
            rhs,
            CG_TOLERANCE,
            10 * n,
        )
        .ok_or(DynamicsError::SchurSolve { t, condition })
    }
}

/// Conjugate gradients for an SPD operator; `None` if the relative residual
/// does not reach `tol` within `max_iter` iterations.
pub fn conjugate_gradient<F>(
    op: F,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let b_norm = b.norm();
    let mut x = DVector::zeros(b.len());
    if b_norm == 0.0 {
        return Some(x);
    }
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr = r.norm_squared();
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Some(x);
        }
        let ad = op(&d);
        let step = rr / d.dot(&ad);
        if !step.is_finite() {
            return None;
        }
        x.axpy(step, &d, 1.0);
        r.axpy(-step, &ad, 1.0);
        let rr_new = r.norm_squared();
        d = &r + &d * (rr_new / rr);
        rr = rr_new;
    }
    (rr.sqrt() <= tol * b_norm).then_some(x)
}

/// Dense `(n+m) x (n+m)` block matrix `[I, a K^T; -a K, I]`.
pub fn dense_block_matrix(problem: &ProblemSpec, coupling_scale: f64) -> DMatrix<f64> {
    let (n, m) = (problem.n(), problem.m());
    let k = problem.coupling().matrix();
    let mut mat = DMatrix::identity(n + m, n + m);
    mat.view_mut((0, n), (n, m))
        .copy_from(&(k.transpose() * coupling_scale));
    mat.view_mut((n, 0), (m, n)).copy_from(&(k * -coupling_scale));
    mat
}

/// Time derivative `[x' | y' | x'' | y'']` of the phase vector at time `t`.
pub fn phase_rhs(
    problem: &ProblemSpec,
    params: &DynamicsParams,
    t: f64,
    phase: &PhaseVector,
) -> Result<PhaseVector, DynamicsError> {
    if phase.0.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFinite {
            what: "phase vector",
            t,
        });
    }
    let state = phase.to_state(t, problem.n(), problem.m())?;
    let (ax, ay) = accelerations(problem, params, &state)?;
    let derivative = State {
        t,
        x: state.vx,
        y: state.vy,
        vx: ax,
        vy: ay,
    };
    Ok(PhaseVector::from_state(&derivative))
}
