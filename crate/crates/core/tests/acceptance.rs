//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::convert::Infallible;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DVector;
use rayon::prelude::*;
use saddle_flow::diagnostics::{
    check_hypotheses, count_strict_local_maxima, dyadic_increments, integrands,
    objective_error_series, tail_to_head_ratio, tail_windows, tikhonov_center,
    tikhonov_center_velocity, total_variation, DyadicWindow,
};
use saddle_flow::dynamics::{
    accelerations, aug_lagrangian, block_system, dense_block_matrix, grad_x_lt, grad_y_lt, theta,
    theta_dot,
};
use saddle_flow::expcli::config::{
    HorizonConfig, InitialConfig, IntegratorSection, OutputConfig, ParamsConfig, ProblemConfig,
    RunConfig, Spacing,
};
use saddle_flow::expcli::{cmd_run, output::CSV_HEADER};
use saddle_flow::integrator::integrate;
use saddle_flow::problem::{GaussianStream, InitialData, ProblemSpec};
use saddle_flow::{simulate, DynamicsParams, IntegratorConfig, SampleGrid, State, Trajectory};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn within(elapsed: Duration, budget_s: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    let detail = format!("{detail}; {secs:.2}s of {budget_s}s");
    if secs < budget_s {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn check(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_state(stream: &mut GaussianStream, t: f64, n: usize, m: usize) -> State {
    State {
        t,
        x: stream.vector(n),
        y: stream.vector(m),
        vx: stream.vector(n),
        vy: stream.vector(m),
    }
}

fn instances() -> Vec<(&'static str, ProblemSpec)> {
    vec![
        ("example51", example51()),
        ("example52", example52(20, 50, SEED).0),
    ]
}

// 1. FD consistency of both L_t gradients.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let params = DynamicsParams::new(2.5, 0.42, 0.005, 0.268, 10.0, 0.8, 1.0).unwrap();
    let mut stream = GaussianStream::new(101);
    let mut worst: f64 = 0.0;
    for (_, prob) in instances() {
        for k in 0..100 {
            let t = 1.0 + 99.0 * k as f64 / 99.0;
            let x = stream.vector(prob.n());
            let y = stream.vector(prob.m());
            let gx = grad_x_lt(&prob, &params, t, &x, &y).unwrap();
            let gy = grad_y_lt(&prob, &params, t, &x, &y).unwrap();
            let fx = fd_gradient(|z| aug_lagrangian(&prob, &params, t, z, &y).unwrap(), &x);
            let fy = fd_gradient(|z| aug_lagrangian(&prob, &params, t, &x, z).unwrap(), &y);
            worst = worst
                .max((&gx - &fx).norm() / gx.norm().max(f64::MIN_POSITIVE))
                .max((&gy - &fy).norm() / gy.norm().max(f64::MIN_POSITIVE));
        }
    }
    check(worst <= 1e-6, format!("max relative error {worst:.2e} <= 1e-6"))
        .and_then(|d| within(start.elapsed(), 1.0, d))
}

// 2. Block solve residual and dense agreement.
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut stream = GaussianStream::new(202);
    let small = example52(5, 10, SEED + 1).0;
    let problems = [
        ("example51", example51()),
        ("example52 5x10", small),
        ("example52 20x50", example52(20, 50, SEED).0),
    ];
    let gammas = [0.2, 0.8, 1.4];
    let (mut worst_res, mut worst_dense): (f64, f64) = (0.0, 0.0);
    let mut dense_checked = 0;
    for k in 0..1000 {
        let (_, prob) = &problems[k % 3];
        let gamma = gammas[(k / 3) % 3];
        let params = DynamicsParams::new(3.0, 0.6, 0.4, 0.9, 5.0, gamma, 1.0).unwrap();
        let t = 1.0 + (k as f64 * 0.37) % 60.0;
        let state = random_state(&mut stream, t, prob.n(), prob.m());
        let sys = block_system(prob, &params, &state).unwrap();
        let (ax, ay) = accelerations(prob, &params, &state).unwrap();
        let (n, m) = (prob.n(), prob.m());
        let mut z = DVector::zeros(n + m);
        z.rows_mut(0, n).copy_from(&ax);
        z.rows_mut(n, m).copy_from(&ay);
        let mut f = DVector::zeros(n + m);
        f.rows_mut(0, n).copy_from(&sys.fx);
        f.rows_mut(n, m).copy_from(&sys.fy);
        let mat = dense_block_matrix(prob, sys.coupling_scale);
        worst_res = worst_res.max((&mat * &z - &f).norm() / f.norm().max(f64::MIN_POSITIVE));
        if n + m <= 20 {
            let dense = mat.lu().solve(&f).unwrap();
            worst_dense = worst_dense.max((&dense - &z).norm() / dense.norm().max(f64::MIN_POSITIVE));
            dense_checked += 1;
        }
    }
    check(
        worst_res <= 1e-10 && worst_dense <= 1e-10,
        format!(
            "max relative residual {worst_res:.2e}, max dense deviation {worst_dense:.2e} over {dense_checked} small states"
        ),
    )
    .and_then(|d| within(start.elapsed(), 5.0, d))
}

// 3. theta closed form and theta_dot against finite differences.
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let ts = log_grid(1.0, 1e4, 400);
    let param_sets = [
        (2.5, 0.42, 0.005, 0.268, 10.0),
        (3.0, 0.6, 0.4, 2.3, 5.0),
        (3.0, 0.8, 0.4, 2.3, 5.0),
    ];
    let (mut closed, mut fd): (f64, f64) = (0.0, 0.0);
    for (alpha, q, s, p, c) in param_sets {
        for gamma in [0.0, 0.8] {
            let params = DynamicsParams::new(alpha, q, s, p, c, gamma, 1.0).unwrap();
            for &t in &ts {
                if gamma == 0.0 {
                    let exact = t.powf(q) / (alpha - 1.0);
                    closed = closed.max((theta(&params, t).unwrap() - exact).abs() / exact);
                }
                let tt = t.max(1.0 + 1e-5);
                let h = 1e-6 * tt;
                let num = (theta(&params, tt + h).unwrap() - theta(&params, tt - h).unwrap())
                    / (2.0 * h);
                let an = theta_dot(&params, tt).unwrap();
                fd = fd.max((an - num).abs() / an.abs());
            }
        }
    }
    check(
        closed <= 1e-14 && fd <= 1e-6,
        format!("closed form {closed:.2e} <= 1e-14, derivative {fd:.2e} <= 1e-6"),
    )
    .and_then(|d| within(start.elapsed(), 1.0, d))
}

// 4. Integrator order and default accuracy.
fn criterion_4() -> Outcome {
    let start = Instant::now();
    let rhs = |_t: f64, z: &DVector<f64>| -> Result<DVector<f64>, Infallible> {
        Ok(DVector::from_vec(vec![z[1], -z[0]]))
    };
    let err = |cfg: &IntegratorConfig| {
        let grid = SampleGrid::new(vec![2.0 * PI]).unwrap();
        let z0 = DVector::from_vec(vec![1.0, 0.0]);
        let z = integrate(rhs, 0.0, 2.0 * PI, &z0, cfg, &grid).unwrap().samples[0].1.clone();
        ((z[0] - 1.0).powi(2) + z[1].powi(2)).sqrt()
    };
    let hs = [0.1, 0.05, 0.025];
    let errs: Vec<f64> = hs
        .iter()
        .map(|h| {
            err(&IntegratorConfig {
                fixed_step: Some(*h),
                ..IntegratorConfig::default()
            })
        })
        .collect();
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / 3.0;
    let my = ly.iter().sum::<f64>() / 3.0;
    let order = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let adaptive = err(&IntegratorConfig::default());
    check(
        order >= 4.5 && adaptive <= 1e-6,
        format!("fitted order {order:.2} >= 4.5, adaptive error at 2 pi {adaptive:.2e} <= 1e-6"),
    )
    .and_then(|d| within(start.elapsed(), 1.0, d))
}

// 5. Center path bounds.
fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cases = [
        (
            "example52 20x50",
            example52(20, 50, SEED).0,
            DynamicsParams::new(3.0, 0.6, 0.4, 0.9, 5.0, 0.0, 1.0).unwrap(),
        ),
        ("example51", example51(), params51(0.0, 10.0)),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (name, prob, params) in &cases {
        let star = prob.min_norm_saddle().unwrap().norm();
        let (mut norm_excess, mut speed_ratio): (f64, f64) = (f64::NEG_INFINITY, 0.0);
        for t in log_grid(1.0, 1e4, 30) {
            let c = tikhonov_center(prob, params, t).unwrap();
            norm_excess = norm_excess.max(c.norm() - star);
            let (vx, vy) = tikhonov_center_velocity(prob, params, t).unwrap();
            let speed = (vx.norm_squared() + vy.norm_squared()).sqrt();
            let bound = params.p / t * star;
            if speed > 1.01 * bound {
                ok = false;
            }
            if bound > 0.0 {
                speed_ratio = speed_ratio.max(speed / bound);
            }
        }
        ok &= norm_excess <= 1e-8;
        details.push(format!(
            "{name}: max |z_t| - |z*| = {norm_excess:.2e}, max speed/bound = {speed_ratio:.4}"
        ));
    }
    check(ok, details.join("; ")).and_then(|d| within(start.elapsed(), 10.0, d))
}

fn run51(gamma: f64, c: f64) -> Trajectory {
    let grid = SampleGrid::log_spaced(1.0, 50.0, 200).unwrap();
    simulate(
        &example51(),
        &params51(gamma, c),
        &initial51(),
        1.0,
        50.0,
        &IntegratorConfig::default(),
        &grid,
    )
    .unwrap()
}

fn final_norm(t: &Trajectory) -> f64 {
    let s = t.states.last().unwrap();
    (s.x.norm_squared() + s.y.norm_squared()).sqrt()
}

// 6. Two-variable example: hypotheses, convergence and smoothing.
fn criterion_6() -> Outcome {
    let start = Instant::now();
    let report = check_hypotheses(&params51(0.8, 10.0));
    let m = &report.thm42_margins;
    let margins_ok = report.thm42_ok
        && (m[2] - 0.577).abs() < 5e-4
        && (m[3] - 0.047).abs() < 5e-4
        && (m[4] - 0.003).abs() < 5e-4;

    let runs: Vec<((f64, f64), Trajectory)> = [(0.0, 0.0), (0.8, 0.0), (0.0, 10.0), (0.8, 10.0)]
        .par_iter()
        .map(|&(g, c)| ((g, c), run51(g, c)))
        .collect();
    let get = |g: f64, c: f64| &runs.iter().find(|(k, _)| *k == (g, c)).unwrap().1;
    let initial = (initial51().x.norm_squared() + initial51().y.norm_squared()).sqrt();

    let b = final_norm(get(0.8, 10.0));
    let b_ok = b <= 0.2 * initial;

    let saddle_dist = |t: &Trajectory| {
        let s = t.states.last().unwrap();
        (s.x[0] + 10.0 * s.x[1]).abs() + (10.0 * s.y[0] + s.y[1]).abs()
    };
    let c0 = [saddle_dist(get(0.0, 0.0)), saddle_dist(get(0.8, 0.0))];
    let c_ok = c0.iter().all(|d| *d <= 0.1)
        && [0.0, 0.8]
            .iter()
            .all(|&g| final_norm(get(g, 10.0)) <= 0.2 * initial && final_norm(get(g, 10.0)) < final_norm(get(g, 0.0)));

    let osc = |t: &Trajectory| {
        let gap: Vec<f64> = t.rows.iter().map(|r| r.gap.unwrap()).collect();
        count_strict_local_maxima(&gap)
    };
    let (osc_damped, osc_plain) = (osc(get(0.8, 10.0)), osc(get(0.0, 10.0)));
    let d_ok = osc_damped <= osc_plain;

    check(
        margins_ok && b_ok && c_ok && d_ok,
        format!(
            "(a) margins {:.3}/{:.3}/{:.3} {}; (b) final |z| {b:.2e} vs 0.2*{initial:.3}; (c) c=0 |v'x|+|u'y| {:.2e}, {:.2e}; c=10 final |z| {:.2e}, {:.2e}; (d) oscillations {osc_damped} <= {osc_plain}",
            m[2],
            m[3],
            m[4],
            if report.thm42_ok { "thm42 PASS" } else { "thm42 FAIL" },
            c0[0],
            c0[1],
            final_norm(get(0.0, 10.0)),
            final_norm(get(0.8, 10.0)),
        ),
    )
    .and_then(|d| within(start.elapsed(), 30.0, d))
}

fn tight() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-13,
        ..IntegratorConfig::default()
    }
}

fn run52(q: f64, gamma: f64, config: &IntegratorConfig) -> (ProblemSpec, Trajectory) {
    let (prob, init): (ProblemSpec, InitialData) = example52(20, 50, SEED);
    let grid = SampleGrid::log_spaced(1.0, 200.0, 200).unwrap();
    let traj = simulate(&prob, &params52(q, gamma), &init, 1.0, 200.0, config, &grid).unwrap();
    (prob, traj)
}

fn decreasing(ws: &[DyadicWindow]) -> bool {
    ws.windows(2).all(|w| w[1].increment < w[0].increment)
}

// 7. Fixed-anchor rate suite on the least-squares example.
fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for q in [0.6, 0.7, 0.8] {
        let start = Instant::now();
        let params = params52(q, 0.2);
        let (_, traj) = run52(q, 0.2, &tight());
        let ts = traj.times();
        let scaled = |f: &dyn Fn(&saddle_flow::DiagnosticsRow) -> f64| -> Vec<f64> {
            traj.rows.iter().map(f).collect()
        };
        let gap = scaled(&|r| r.t.powf(2.0 * q + params.s) * r.gap.unwrap());
        let rx = scaled(&|r| r.t.powf(q) * r.residual_x);
        let ry = scaled(&|r| r.t.powf(q) * r.residual_y);
        let ratios = [
            tail_to_head_ratio(&ts, &gap).unwrap(),
            tail_to_head_ratio(&ts, &rx).unwrap(),
            tail_to_head_ratio(&ts, &ry).unwrap(),
        ];
        let (speed, delta) = integrands(&traj.rows, &params);
        let ws = dyadic_increments(&ts, &speed);
        let wd = dyadic_increments(&ts, &delta);
        let (tail_s, tail_d) = (tail_windows(&ws), tail_windows(&wd));
        let q_ok = ratios.iter().all(|r| *r <= 1.5)
            && tail_s.len() >= 2
            && tail_d.len() >= 2
            && decreasing(tail_s)
            && decreasing(tail_d);
        let secs = start.elapsed().as_secs_f64();
        ok &= q_ok && secs < 60.0;
        let incs = |w: &[DyadicWindow]| {
            w.iter()
                .map(|x| format!("{:.1e}", x.increment))
                .collect::<Vec<_>>()
                .join(">")
        };
        details.push(format!(
            "q={q}: ratios gap {:.1e} rx {:.1e} ry {:.1e}, speed tail {}, delta tail {}, {secs:.2}s",
            ratios[0],
            ratios[1],
            ratios[2],
            incs(tail_s),
            incs(tail_d)
        ));
    }
    check(ok, details.join("; "))
}

// 8. Hessian damping reduces the total variation of the objective error.
fn criterion_8() -> Outcome {
    let start = Instant::now();
    let cases: Vec<(f64, f64)> = [0.6, 0.7, 0.8]
        .iter()
        .flat_map(|&q| [(q, 0.0), (q, 0.2)])
        .collect();
    let tvs: Vec<((f64, f64), f64)> = cases
        .par_iter()
        .map(|&(q, g)| {
            let (prob, traj) = run52(q, g, &IntegratorConfig::default());
            let errs = objective_error_series(&prob, &traj.states).unwrap();
            ((q, g), total_variation(&errs))
        })
        .collect();
    let tv = |q: f64, g: f64| tvs.iter().find(|(k, _)| *k == (q, g)).unwrap().1;
    let mut ok = true;
    let mut details = Vec::new();
    for q in [0.6, 0.7, 0.8] {
        ok &= tv(q, 0.2) <= tv(q, 0.0);
        details.push(format!("q={q}: {:.3} <= {:.3}", tv(q, 0.2), tv(q, 0.0)));
    }
    check(ok, details.join("; ")).and_then(|d| within(start.elapsed(), 120.0, d))
}

fn criterion7_config(dir: std::path::PathBuf) -> RunConfig {
    let t = tight();
    RunConfig {
        problem: ProblemConfig::Example52 {
            m: 20,
            n: 50,
            eta: 1.0,
            seed: SEED,
        },
        params: ParamsConfig {
            alpha: 3.0,
            q: 0.6,
            s: 0.4,
            p: 2.3,
            c: 5.0,
            gamma: 0.2,
            t0: 1.0,
        },
        integrator: IntegratorSection {
            rel_tol: Some(t.rel_tol),
            abs_tol: Some(t.abs_tol),
            ..IntegratorSection::default()
        },
        horizon: HorizonConfig {
            t_start: 1.0,
            t_end: 200.0,
            samples: 200,
            spacing: Spacing::Log,
        },
        initial: InitialConfig::Instance,
        output: OutputConfig { dir, plots: false },
    }
}

// 9. Byte-identical CSV on repetition.
fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files: Vec<Vec<u8>> = ["first", "second"]
        .iter()
        .map(|name| {
            let cfg = criterion7_config(tmp.path().join(name));
            let out = cmd_run(&cfg).expect("criterion 7 run");
            std::fs::read(out.dir.join("trajectory.csv")).expect("csv written")
        })
        .collect();
    let header_ok = files[0].starts_with(CSV_HEADER.as_bytes());
    check(
        header_ok && files[0] == files[1],
        format!("{} bytes, identical: {}", files[0].len(), files[0] == files[1]),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("gradient consistency", criterion_1),
        ("block solve", criterion_2),
        ("theta closed form and derivative", criterion_3),
        ("integrator order", criterion_4),
        ("center path bounds", criterion_5),
        ("two-variable example", criterion_6),
        ("fixed-anchor rates", criterion_7),
        ("damping smooths objective error", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", k + 1)
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
