//! Single runs, sweeps and hypothesis checks.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{PreparedRun, RunConfig, SweepConfig};
use super::output::{
    csv_string, format_float, key_values_string, read_csv, row_is_finite, write_file,
};
use super::svg::{line_chart, Scale, Series};
use super::CliError;
use crate::diagnostics::{
    check_hypotheses, count_strict_local_maxima, fit_rate, objective_error_series,
    total_variation, DiagnosticsRow, HypothesisReport, RateFit,
};
use crate::dynamics::{DynamicsParams, State};
use crate::trajectory::{simulate, SimulationError, Trajectory};

/// Fraction of samples (by count) used for the summary rate fits.
pub const FIT_TAIL_FRACTION: f64 = 0.5;
/// Components per variable drawn in the component plot.
pub const MAX_PLOTTED_COMPONENTS: usize = 4;

pub const CSV_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub trajectory: Trajectory,
    /// Why integration stopped early, if it did.
    pub abort: Option<String>,
    pub summary: Vec<(String, String)>,
}

impl RunOutcome {
    pub fn complete(&self) -> bool {
        self.abort.is_none()
    }

    pub fn exit_code(&self) -> i32 {
        if self.complete() {
            0
        } else {
            3
        }
    }
}

/// Integrates a validated run. An aborted integration yields the partial
/// trajectory and the reason.
pub fn execute(run: &PreparedRun) -> Result<(Trajectory, Option<String>), CliError> {
    let result = simulate(
        &run.problem,
        &run.params,
        &run.initial,
        run.t_start,
        run.t_end,
        &run.integrator,
        &run.grid,
    );
    let (mut traj, mut abort) = match result {
        Ok(t) => (t, None),
        Err(SimulationError::Integration { kind, partial }) => (*partial, Some(kind.to_string())),
        Err(e @ SimulationError::Diagnostics(_)) => return Err(CliError::Integration(e.to_string())),
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    if let Some(k) = traj.rows.iter().position(|r| !row_is_finite(r)) {
        let t = traj.rows[k].t;
        traj.rows.truncate(k);
        traj.states.truncate(k);
        traj.complete = false;
        abort.get_or_insert_with(|| format!("non-finite diagnostics at t = {t}"));
    }
    Ok((traj, abort))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), format_float)
}

fn fit_entries(prefix: &str, fit: &RateFit) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}_slope"), format_float(fit.slope)),
        (format!("{prefix}_intercept"), format_float(fit.intercept)),
        (format!("{prefix}_r_squared"), format_float(fit.r_squared)),
        (format!("{prefix}_points"), fit.points_used.to_string()),
        (format!("{prefix}_skipped"), fit.skipped_nonpositive.to_string()),
        (format!("{prefix}_window_start"), format_float(fit.window.0)),
        (format!("{prefix}_window_end"), format_float(fit.window.1)),
        (format!("{prefix}_reliable"), fit.reliable.to_string()),
    ]
}

fn column(rows: &[DiagnosticsRow], f: impl Fn(&DiagnosticsRow) -> Option<f64>) -> Vec<(f64, f64)> {
    rows.iter().filter_map(|r| f(r).map(|v| (r.t, v))).collect()
}

fn state_norm(s: &State) -> f64 {
    (s.x.norm_squared() + s.y.norm_squared()).sqrt()
}

/// `key=value` summary of a finished or partial run.
pub fn summarize(
    run: &PreparedRun,
    traj: &Trajectory,
    abort: Option<&str>,
) -> Vec<(String, String)> {
    let mut kv: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
    put("complete", (abort.is_none()).to_string());
    if let Some(reason) = abort {
        put("abort_reason", reason.replace('\n', " "));
    }
    put("n", run.problem.n().to_string());
    put("m", run.problem.m().to_string());
    let p = run.params;
    for (k, v) in [
        ("alpha", p.alpha),
        ("q", p.q),
        ("s", p.s),
        ("p", p.p),
        ("c", p.c),
        ("gamma", p.gamma),
        ("t0", p.t0),
        ("t_start", run.t_start),
        ("t_end", run.t_end),
        ("rel_tol", run.integrator.rel_tol),
        ("abs_tol", run.integrator.abs_tol),
    ] {
        put(k, format_float(v));
    }
    put("samples_written", traj.rows.len().to_string());
    put("rhs_evals", traj.stats.rhs_evals.to_string());
    put("accepted_steps", traj.stats.accepted.to_string());
    put("rejected_steps", traj.stats.rejected.to_string());
    for (k, v) in check_hypotheses(&run.params).key_values() {
        kv.push((k, v));
    }

    let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
    let initial_norm = (run.initial.x.norm_squared() + run.initial.y.norm_squared()).sqrt();
    put("initial_norm", format_float(initial_norm));
    let last = traj.rows.last();
    put("final_t", opt(last.map(|r| r.t)));
    put("final_norm", opt(traj.states.last().map(state_norm)));
    put("final_gap", opt(last.and_then(|r| r.gap)));
    put("final_lt_gap", opt(last.and_then(|r| r.lt_gap)));
    put("final_dist_min_norm", opt(last.and_then(|r| r.dist_min_norm)));
    put("final_dist_center", opt(last.and_then(|r| r.dist_center)));
    put("final_speed", opt(last.map(|r| r.speed)));

    let gap = column(&traj.rows, |r| r.gap);
    let dist = column(&traj.rows, |r| r.dist_min_norm);
    kv.extend(fit_entries("gap_fit", &fit_rate(&gap, FIT_TAIL_FRACTION)));
    kv.extend(fit_entries(
        "dist_min_norm_fit",
        &fit_rate(&dist, FIT_TAIL_FRACTION),
    ));

    let gap_values: Vec<f64> = gap.iter().map(|p| p.1).collect();
    let (osc, tv) = if gap_values.is_empty() {
        ("NA".to_string(), "NA".to_string())
    } else {
        (
            count_strict_local_maxima(&gap_values).to_string(),
            format_float(total_variation(&gap_values)),
        )
    };
    kv.push(("oscillation_count".into(), osc));
    kv.push(("gap_total_variation".into(), tv));
    let objective_tv = objective_error_series(&run.problem, &traj.states)
        .filter(|v| !v.is_empty())
        .map(|v| total_variation(&v));
    kv.push(("objective_total_variation".into(), opt(objective_tv)));
    kv
}

fn rate_plot(rows: &[DiagnosticsRow]) -> String {
    let series: Vec<Series> = [
        ("gap", column(rows, |r| r.gap)),
        ("lt_gap", column(rows, |r| r.lt_gap)),
        ("dist_min_norm", column(rows, |r| r.dist_min_norm)),
        ("dist_center", column(rows, |r| r.dist_center)),
        ("speed", column(rows, |r| Some(r.speed))),
    ]
    .into_iter()
    .filter(|(_, pts)| !pts.is_empty())
    .map(|(name, pts)| Series::new(name, pts))
    .collect();
    line_chart("Convergence", "t", "value", Scale::Log, Scale::Log, &series)
}

fn component_plot(states: &[State]) -> String {
    let mut series = Vec::new();
    if let Some(first) = states.first() {
        for (name, len, pick) in [
            ("x", first.x.len(), 0usize),
            ("y", first.y.len(), 1usize),
        ] {
            for i in 0..len.min(MAX_PLOTTED_COMPONENTS) {
                let pts = states
                    .iter()
                    .map(|s| (s.t, if pick == 0 { s.x[i] } else { s.y[i] }))
                    .collect();
                series.push(Series::new(format!("{name}{}", i + 1), pts));
            }
        }
    }
    line_chart(
        "Trajectory components",
        "t",
        "component",
        Scale::Linear,
        Scale::Linear,
        &series,
    )
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Validates, integrates and writes `trajectory.csv`, `summary.txt` and
/// (optionally) `rates.svg` and `components.svg` into the output directory.
/// A partial run still writes its files and reports `complete=false`.
pub fn cmd_run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let run = config.prepare()?;
    let (trajectory, abort) = execute(&run)?;
    let dir = config.output.dir.clone();
    create_dir(&dir)?;
    write_file(&dir.join(CSV_FILE), &csv_string(&trajectory.rows))?;
    let summary = summarize(&run, &trajectory, abort.as_deref());
    write_file(&dir.join(SUMMARY_FILE), &key_values_string(&summary))?;
    if config.output.plots {
        write_file(&dir.join("rates.svg"), &rate_plot(&trajectory.rows))?;
        write_file(&dir.join("components.svg"), &component_plot(&trajectory.states))?;
    }
    Ok(RunOutcome {
        dir,
        trajectory,
        abort,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Complete,
    Incomplete(String),
    Failed(String),
}

impl PointStatus {
    fn label(&self) -> &'static str {
        match self {
            PointStatus::Complete => "ok",
            PointStatus::Incomplete(_) => "incomplete",
            PointStatus::Failed(_) => "failed",
        }
    }
}

/// One line of the sweep comparison table, computed from the reloaded CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub assignments: Vec<(String, f64)>,
    pub status: PointStatus,
    pub final_gap: Option<f64>,
    pub final_dist_min_norm: Option<f64>,
    pub oscillation_count: Option<usize>,
    pub gap_total_variation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub dir: PathBuf,
    pub rows: Vec<ComparisonRow>,
}

impl SweepReport {
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().all(|r| r.status == PointStatus::Complete) {
            0
        } else {
            3
        }
    }

    pub fn table(&self) -> String {
        let mut out =
            String::from("point,status,final_gap,final_dist_min_norm,oscillation_count,gap_total_variation\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.label,
                r.status.label(),
                opt(r.final_gap),
                opt(r.final_dist_min_norm),
                r.oscillation_count
                    .map_or_else(|| "NA".to_string(), |c| c.to_string()),
                opt(r.gap_total_variation),
            ));
        }
        out
    }
}

/// Runs every grid point in parallel, then assembles the comparison table
/// (`comparison.csv`) and the overlay plot (`gap_overlay.svg`) from the
/// per-point CSV files. Failing points are recorded and do not stop the
/// sweep.
pub fn cmd_sweep(config: &SweepConfig) -> Result<SweepReport, CliError> {
    let points = config.grid()?;
    let statuses: Vec<PointStatus> = points
        .par_iter()
        .map(|pt| match cmd_run(&pt.config) {
            Ok(o) => match o.abort {
                None => PointStatus::Complete,
                Some(reason) => PointStatus::Incomplete(reason),
            },
            Err(e) => PointStatus::Failed(e.to_string()),
        })
        .collect();

    let dir = config.output.dir.clone();
    create_dir(&dir)?;
    let mut rows = Vec::with_capacity(points.len());
    let mut overlay = Vec::new();
    for (pt, status) in points.into_iter().zip(statuses) {
        let csv = pt.config.output.dir.join(CSV_FILE);
        let data = match status {
            PointStatus::Failed(_) => None,
            _ => Some(read_csv(&csv)?),
        };
        let gap: Vec<(f64, f64)> = data
            .as_deref()
            .map(|d| column(d, |r| r.gap))
            .unwrap_or_default();
        let gap_values: Vec<f64> = gap.iter().map(|p| p.1).collect();
        let last = data.as_ref().and_then(|d| d.last());
        rows.push(ComparisonRow {
            label: pt.label.clone(),
            assignments: pt.assignments,
            final_gap: last.and_then(|r| r.gap),
            final_dist_min_norm: last.and_then(|r| r.dist_min_norm),
            oscillation_count: (!gap_values.is_empty())
                .then(|| count_strict_local_maxima(&gap_values)),
            gap_total_variation: (!gap_values.is_empty()).then(|| total_variation(&gap_values)),
            status,
        });
        if !gap.is_empty() {
            overlay.push(Series::new(pt.label, gap));
        }
    }
    let report = SweepReport { dir, rows };
    write_file(&report.dir.join("comparison.csv"), &report.table())?;
    if config.output.plots {
        write_file(
            &report.dir.join("gap_overlay.svg"),
            &line_chart("Primal-dual gap", "t", "gap", Scale::Log, Scale::Log, &overlay),
        )?;
    }
    Ok(report)
}

/// Which hypothesis set `check` gates its exit code on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// Fixed-anchor gap rates (`--theorem 31`).
    FixedAnchor,
    /// Strong convergence to the minimal-norm solution (`--theorem 42`).
    Strong,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub report: HypothesisReport,
    pub text: String,
    pub exit_code: i32,
}

/// Validates the parameters and evaluates the hypotheses. Without a
/// requested theorem the exit code is 0 when either set holds.
pub fn cmd_check(params: &DynamicsParams, theorem: Option<Theorem>) -> Result<CheckOutcome, CliError> {
    params
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let report = check_hypotheses(params);
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let margins = |m: &[f64]| {
        m.iter()
            .map(|v| format!("{:.6}", v))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut text = format!(
        "base hypotheses: {} [{}]\nthm31 (fixed-anchor rates): {} [{}]\nthm42 (strong convergence): {} [{}]\ncase: {}\n",
        verdict(report.base_ok),
        margins(&report.base_margins),
        verdict(report.thm31_ok),
        margins(&report.thm31_margins),
        verdict(report.thm42_ok),
        margins(&report.thm42_margins),
        report.case.label(),
    );
    text.push_str(&key_values_string(&report.key_values()));
    let holds = report.base_ok
        && match theorem {
            Some(Theorem::FixedAnchor) => report.thm31_ok,
            Some(Theorem::Strong) => report.thm42_ok,
            None => report.thm31_ok || report.thm42_ok,
        };
    Ok(CheckOutcome {
        report,
        text,
        exit_code: if holds { 0 } else { 1 },
    })
}
