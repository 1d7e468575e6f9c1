//! Bilinear convex-concave saddle problems
//! `min_x max_y f(x) + <Kx, y> - g(y)` and the builtin instances.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

/// Absolute residual a stored saddle point must satisfy.
pub const SADDLE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("matrix {what} is not square ({rows}x{cols})")]
    NotSquare {
        what: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("stored saddle point violates the optimality system (residual {residual:e})")]
    NotASaddle { residual: f64 },
    #[error("eta must be positive, got {0}")]
    NonPositiveEta(f64),
    #[error("dimensions must be positive (m={m}, n={n})")]
    EmptyDimension { m: usize, n: usize },
}

/// A twice continuously differentiable convex function on `R^dim`.
pub trait SmoothConvexFn: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, v: &DVector<f64>) -> f64;
    fn gradient(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Hessian at `v` applied to the direction `w`.
    fn hessian_vec(&self, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;

    /// Exposes the quadratic form when the function is one, which lets the
    /// Tikhonov center be found with a single linear solve.
    fn as_quadratic(&self) -> Option<&Quadratic> {
        None
    }
}

/// `v -> 1/2 v^T H v + <l, v>` with symmetric positive semidefinite `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
}

impl Quadratic {
    /// Builds the quadratic; the Hessian is symmetrized as `(H + H^T)/2`.
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Result<Self, ProblemError> {
        if hessian.nrows() != hessian.ncols() {
            return Err(ProblemError::NotSquare {
                what: "quadratic hessian",
                rows: hessian.nrows(),
                cols: hessian.ncols(),
            });
        }
        if linear.len() != hessian.nrows() {
            return Err(ProblemError::Dimension {
                what: "quadratic linear term",
                got: linear.len(),
                expected: hessian.nrows(),
            });
        }
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        Ok(Self { hessian, linear })
    }

    pub fn homogeneous(hessian: DMatrix<f64>) -> Result<Self, ProblemError> {
        let n = hessian.nrows();
        Self::new(hessian, DVector::zeros(n))
    }

    /// `v -> (a^T v)^2`, whose Hessian is `2 a a^T`.
    pub fn squared_projection(a: &DVector<f64>) -> Self {
        Self {
            hessian: a * a.transpose() * 2.0,
            linear: DVector::zeros(a.len()),
        }
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }
}

impl SmoothConvexFn for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        0.5 * v.dot(&(&self.hessian * v)) + self.linear.dot(v)
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.hessian * v + &self.linear
    }

    fn hessian_vec(&self, _v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.hessian * w
    }

    fn as_quadratic(&self) -> Option<&Quadratic> {
        Some(self)
    }
}

/// Dense coupling operator `K: R^n -> R^m`.
#[derive(Debug, Clone)]
pub struct LinearCoupling {
    matrix: DMatrix<f64>,
    op_norm: f64,
}

impl LinearCoupling {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let op_norm = if matrix.is_empty() {
            0.0
        } else {
            matrix
                .clone()
                .singular_values()
                .iter()
                .cloned()
                .fold(0.0, f64::max)
        };
        Self { matrix, op_norm }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(DMatrix::zeros(rows, cols))
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    pub fn adjoint_apply(&self, y: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(y)
    }

    /// Largest singular value of `K`.
    pub fn op_norm_estimate(&self) -> f64 {
        self.op_norm
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Primal-dual pair `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDual {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl PrimalDual {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self::new(DVector::zeros(n), DVector::zeros(m))
    }

    /// Product-space norm `sqrt(|x|^2 + |y|^2)`.
    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.y.norm_squared()).sqrt()
    }

    pub fn distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        ((x - &self.x).norm_squared() + (y - &self.y).norm_squared()).sqrt()
    }
}

/// Initial position and velocity for a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub vx: DVector<f64>,
    pub vy: DVector<f64>,
}

/// A saddle problem with optional known solution data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    f: Arc<dyn SmoothConvexFn>,
    g: Arc<dyn SmoothConvexFn>,
    coupling: LinearCoupling,
    gram: DMatrix<f64>,
    saddle_point: Option<PrimalDual>,
    min_norm_saddle: Option<PrimalDual>,
}

impl ProblemSpec {
    pub fn new(
        f: Arc<dyn SmoothConvexFn>,
        g: Arc<dyn SmoothConvexFn>,
        coupling: LinearCoupling,
    ) -> Result<Self, ProblemError> {
        if coupling.cols() != f.dim() {
            return Err(ProblemError::Dimension {
                what: "coupling columns",
                got: coupling.cols(),
                expected: f.dim(),
            });
        }
        if coupling.rows() != g.dim() {
            return Err(ProblemError::Dimension {
                what: "coupling rows",
                got: coupling.rows(),
                expected: g.dim(),
            });
        }
        let gram = coupling.matrix().tr_mul(coupling.matrix());
        Ok(Self {
            f,
            g,
            coupling,
            gram,
            saddle_point: None,
            min_norm_saddle: None,
        })
    }

    /// Attaches a known saddle point after checking the optimality residual.
    pub fn with_saddle_point(mut self, point: PrimalDual) -> Result<Self, ProblemError> {
        self.verify_saddle(&point)?;
        self.saddle_point = Some(point);
        Ok(self)
    }

    /// Attaches the minimal-norm saddle point after checking the optimality residual.
    pub fn with_min_norm_saddle(mut self, point: PrimalDual) -> Result<Self, ProblemError> {
        self.verify_saddle(&point)?;
        self.min_norm_saddle = Some(point);
        Ok(self)
    }

    fn verify_saddle(&self, point: &PrimalDual) -> Result<(), ProblemError> {
        self.check_dims(&point.x, &point.y)?;
        let residual = self.saddle_residual(&point.x, &point.y);
        if residual > SADDLE_RESIDUAL_TOL {
            return Err(ProblemError::NotASaddle { residual });
        }
        Ok(())
    }

    /// Max-norm of `(grad f(x) + K^T y, Kx - grad g(y))`.
    pub fn saddle_residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let rx = self.f.gradient(x) + self.coupling.adjoint_apply(y);
        let ry = self.coupling.apply(x) - self.g.gradient(y);
        rx.amax().max(ry.amax())
    }

    pub fn check_dims(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<(), ProblemError> {
        if x.len() != self.n() {
            return Err(ProblemError::Dimension {
                what: "x",
                got: x.len(),
                expected: self.n(),
            });
        }
        if y.len() != self.m() {
            return Err(ProblemError::Dimension {
                what: "y",
                got: y.len(),
                expected: self.m(),
            });
        }
        Ok(())
    }

    /// Primal dimension.
    pub fn n(&self) -> usize {
        self.f.dim()
    }

    /// Dual dimension.
    pub fn m(&self) -> usize {
        self.g.dim()
    }

    pub fn f(&self) -> &dyn SmoothConvexFn {
        self.f.as_ref()
    }

    pub fn g(&self) -> &dyn SmoothConvexFn {
        self.g.as_ref()
    }

    pub fn coupling(&self) -> &LinearCoupling {
        &self.coupling
    }

    /// `K^T K`, formed once at construction.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn saddle_point(&self) -> Option<&PrimalDual> {
        self.saddle_point.as_ref()
    }

    pub fn min_norm_saddle(&self) -> Option<&PrimalDual> {
        self.min_norm_saddle.as_ref()
    }

    /// Anchor used for gap and energy diagnostics: the stored saddle point,
    /// falling back to the minimal-norm one.
    pub fn anchor(&self) -> Option<&PrimalDual> {
        self.saddle_point.as_ref().or(self.min_norm_saddle.as_ref())
    }

    /// `L(x, y) = f(x) + <Kx, y> - g(y)`.
    pub fn lagrangian(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.f.value(x) + self.coupling.apply(x).dot(y) - self.g.value(y)
    }

    /// Primal objective `sup_y L(x, y)`, available in closed form when `g`
    /// is a quadratic with positive definite Hessian.
    pub fn primal_value(&self, x: &DVector<f64>) -> Option<f64> {
        let q = self.g.as_quadratic()?;
        let chol = q.hessian().clone().cholesky()?;
        let r = self.coupling.apply(x) - q.linear();
        let w = chol.solve(&r);
        Some(self.f.value(x) + 0.5 * r.dot(&w))
    }
}

/// Example problem `(m x1 + n x2)^2 + (m x1 + n x2)(j y1 + k y2) - (j y1 + k y2)^2`.
///
/// With `v = (m, n)` and `u = (j, k)`: `f(x) = (v^T x)^2`, `g(y) = (u^T y)^2`
/// and `K = u v^T`. The saddle set is `{v^T x = 0, u^T y = 0}`; its minimal
/// norm element is the origin.
pub fn make_example_51(m_coef: f64, n_coef: f64, j_coef: f64, k_coef: f64) -> ProblemSpec {
    let v = DVector::from_vec(vec![m_coef, n_coef]);
    let u = DVector::from_vec(vec![j_coef, k_coef]);
    let f = Quadratic::squared_projection(&v);
    let g = Quadratic::squared_projection(&u);
    let coupling = LinearCoupling::new(&u * v.transpose());
    ProblemSpec::new(Arc::new(f), Arc::new(g), coupling)
        .and_then(|p| p.with_min_norm_saddle(PrimalDual::zeros(2, 2)))
        .expect("example 5.1 construction is dimensionally consistent")
}

/// Saddle formulation of `min_x 1/2 |Kx - b|^2 + eta |x|^2`:
/// `f(x) = eta |x|^2`, `g(y) = 1/2 |y|^2 + <b, y>`.
///
/// The unique saddle point solves `(K^T K + 2 eta I) x* = K^T b`,
/// `y* = K x* - b`; it is stored as both the saddle anchor and the
/// minimal-norm solution.
pub fn make_example_52(
    k_matrix: DMatrix<f64>,
    b: DVector<f64>,
    eta: f64,
) -> Result<ProblemSpec, ProblemError> {
    if !(eta > 0.0) {
        return Err(ProblemError::NonPositiveEta(eta));
    }
    let (m, n) = k_matrix.shape();
    if b.len() != m {
        return Err(ProblemError::Dimension {
            what: "b",
            got: b.len(),
            expected: m,
        });
    }
    let f = Quadratic::homogeneous(DMatrix::identity(n, n) * (2.0 * eta))?;
    let g = Quadratic::new(DMatrix::identity(m, m), b.clone())?;

    let normal = k_matrix.tr_mul(&k_matrix) + DMatrix::identity(n, n) * (2.0 * eta);
    let rhs = k_matrix.tr_mul(&b);
    let x_star = normal
        .cholesky()
        .expect("K^T K + 2 eta I is positive definite")
        .solve(&rhs);
    let y_star = &k_matrix * &x_star - &b;
    let star = PrimalDual::new(x_star, y_star);

    ProblemSpec::new(Arc::new(f), Arc::new(g), LinearCoupling::new(k_matrix))?
        .with_saddle_point(star.clone())?
        .with_min_norm_saddle(star)
}

/// Standard normal stream: xoshiro256++ seeded through SplitMix64
/// (`seed_from_u64`), uniforms from the top 53 bits, and the Box–Muller
/// transform using both outputs of each pair.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in `(0, 1]`.
    fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform_open0();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * phi.sin());
        r * phi.cos()
    }

    pub fn vector(&mut self, len: usize) -> DVector<f64> {
        DVector::from_iterator(len, (0..len).map(|_| self.next_normal()))
    }

    /// Matrix filled in row-major order.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.next_normal()).collect();
        DMatrix::from_row_slice(rows, cols, &data)
    }
}

/// Seeded Gaussian instance of [`make_example_52`] together with Gaussian
/// initial data.
///
/// Draw order from one [`GaussianStream`]: `K` (m x n, row-major), `b`,
/// `x(t0)`, `y(t0)`, `x'(t0)`, `y'(t0)`.
pub fn make_random_instance(
    m: usize,
    n: usize,
    eta: f64,
    seed: u64,
) -> Result<(ProblemSpec, InitialData), ProblemError> {
    if m == 0 || n == 0 {
        return Err(ProblemError::EmptyDimension { m, n });
    }
    let mut stream = GaussianStream::new(seed);
    let k = stream.matrix(m, n);
    let b = stream.vector(m);
    let init = InitialData {
        x: stream.vector(n),
        y: stream.vector(m),
        vx: stream.vector(n),
        vy: stream.vector(m),
    };
    Ok((make_example_52(k, b, eta)?, init))
}
