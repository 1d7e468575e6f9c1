//! Inertial primal-dual dynamics with Hessian-driven damping and Tikhonov
//! regularization for bilinear convex-concave saddle point problems.
//!
//! * [`problem`]: saddle problems and builtin instances
//! * [`dynamics`]: extrapolation coefficient, regularized Lagrangian and the
//!   phase-space right-hand side
//! * [`integrator`]: adaptive Dormand–Prince 5(4)
//! * [`diagnostics`]: Lyapunov energies, gaps, rate fits, hypothesis checks
//! * [`trajectory`]: integration plus per-sample diagnostics
//! * [`expcli`]: experiment runner behind the `saddle-flow` binary

// NaN must fail the negated comparisons used for validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod expcli;
pub mod integrator;
pub mod problem;
pub mod trajectory;

pub use diagnostics::{DiagnosticsRow, HypothesisReport, RateFit, TikhonovCenter};
pub use dynamics::{DynamicsParams, PhaseVector, State};
pub use integrator::{IntegratorConfig, SampleGrid};
pub use problem::{InitialData, PrimalDual, ProblemSpec};
pub use trajectory::{simulate, Trajectory};
