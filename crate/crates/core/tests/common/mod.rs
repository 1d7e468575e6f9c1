#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use saddle_flow::problem::{make_example_51, make_random_instance, InitialData, ProblemSpec};
use saddle_flow::DynamicsParams;

pub fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub const SEED: u64 = 2024;

pub fn example51() -> ProblemSpec {
    make_example_51(1.0, 10.0, 10.0, 1.0)
}

pub fn params51(gamma: f64, c: f64) -> DynamicsParams {
    DynamicsParams::new(2.5, 0.42, 0.005, 0.268, c, gamma, 1.0).unwrap()
}

pub fn initial51() -> InitialData {
    InitialData {
        x: dv(&[1.0, 1.5]),
        y: dv(&[1.0, 1.5]),
        vx: dv(&[1.0, 1.0]),
        vy: dv(&[1.0, 1.0]),
    }
}

pub fn example52(m: usize, n: usize, seed: u64) -> (ProblemSpec, InitialData) {
    make_random_instance(m, n, 1.0, seed).unwrap()
}

pub fn params52(q: f64, gamma: f64) -> DynamicsParams {
    DynamicsParams::new(3.0, q, 0.4, 2.3, 5.0, gamma, 1.0).unwrap()
}

/// Relative error with a unit floor on the scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, at: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(at.len());
    for i in 0..at.len() {
        let h = 1e-6 * (1.0 + at[i].abs());
        let mut p = at.clone();
        let mut q = at.clone();
        p[i] += h;
        q[i] -= h;
        g[i] = (f(&p) - f(&q)) / (2.0 * h);
    }
    g
}

/// Log-spaced points on `[a, b]`.
pub fn log_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

pub fn random_matrix(rows: usize, cols: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, &entries[..rows * cols])
}
