use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use saddle_flow::expcli::output::{parse_key_values, read_csv, CSV_HEADER};

const BIN: &str = env!("CARGO_BIN_EXE_saddle-flow");

fn saddle_flow(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn example51_config(dir: &Path, gamma: f64, t_end: f64) -> String {
    format!(
        r#"
[problem]
kind = "example51"
coefficients = [1.0, 10.0, 10.0, 1.0]

[params]
alpha = 2.5
q = 0.42
s = 0.005
p = 0.268
c = 10.0
gamma = {gamma}
t0 = 1.0

[horizon]
t_start = 1.0
t_end = {t_end}

[initial]
kind = "explicit"
x = [1.0, 1.5]
y = [1.0, 1.5]
vx = [1.0, 1.0]
vy = [1.0, 1.0]

[output]
dir = "{}"
"#,
        dir.display()
    )
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn run_writes_csv_summary_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = tmp.path().join("run.toml");
    write(&cfg, &example51_config(&out, 0.8, 50.0));
    let o = saddle_flow(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert!(!text.contains("NaN") && !text.contains("inf"));
    let rows = read_csv(&out.join("trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 200);
    assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
    assert_eq!((rows[0].t, rows[199].t), (1.0, 50.0));

    let summary = parse_key_values(&fs::read_to_string(out.join("summary.txt")).unwrap());
    let get = |k: &str| summary.iter().find(|(a, _)| a == k).map(|(_, v)| v.as_str());
    assert_eq!(get("complete"), Some("true"));
    assert_eq!(get("thm42_ok"), Some("true"));
    assert_eq!(get("case"), Some("q+2p<1"));
    for key in [
        "final_dist_min_norm",
        "gap_fit_slope",
        "dist_min_norm_fit_slope",
        "oscillation_count",
        "gap_total_variation",
    ] {
        assert!(get(key).is_some(), "missing {key}");
    }
    for svg in ["rates.svg", "components.svg"] {
        let s = fs::read_to_string(out.join(svg)).unwrap();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn zero_horizon_gives_initial_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("zero");
    let cfg = tmp.path().join("zero.toml");
    write(&cfg, &example51_config(&out, 0.8, 1.0));
    let o = saddle_flow(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rows = read_csv(&out.join("trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].t, 1.0);
    assert_eq!(rows[0].gap, Some(388.25));
    assert_eq!(rows[0].speed, 2.0);
    assert_eq!(rows[0].dist_min_norm, Some((1.0f64 + 2.25 + 1.0 + 2.25).sqrt()));
}

#[test]
fn invalid_t0_exits_2_with_named_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = example51_config(&tmp.path().join("bad"), 0.8, 50.0)
        .replace("t0 = 1.0", "t0 = 0.3")
        .replace("t_start = 1.0", "t_start = 0.3");
    write(&cfg, &text);
    let o = saddle_flow(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("t0 > (gamma q)^(1/(s+1))"), "{err}");
    assert!(!tmp.path().join("bad").exists());
}

#[test]
fn malformed_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    write(&cfg, "[problem]\nkind = \"nope\"\n");
    assert_eq!(saddle_flow(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn integration_abort_exits_3_with_flagged_partial_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("abort");
    let cfg = tmp.path().join("abort.toml");
    let text = example51_config(&out, 0.0, 50.0)
        .replace("[horizon]", "[integrator]\nmax_rhs_evals = 2000\n\n[horizon]");
    write(&cfg, &text);
    let o = saddle_flow(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let rows = read_csv(&out.join("trajectory.csv")).unwrap();
    assert!(!rows.is_empty() && rows.len() < 200);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("complete=false"));
    assert!(summary.contains("abort_reason="));
}

#[test]
fn check_exit_codes() {
    let ex51 = [
        "check", "--alpha", "2.5", "--q", "0.42", "--s", "0.005", "--p", "0.268", "--c", "10",
        "--gamma", "0.8", "--t0", "1",
    ];
    let o = saddle_flow(&[&ex51[..], &["--theorem", "42"]].concat());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("thm42_ok=true") && text.contains("case=q+2p<1"));
    assert_eq!(
        saddle_flow(&[&ex51[..], &["--theorem", "31"]].concat()).status.code(),
        Some(1)
    );

    let ex52 = [
        "check", "--alpha", "3", "--q", "0.8", "--s", "0.4", "--p", "2.3", "--c", "5", "--gamma",
        "0.2", "--t0", "1", "--theorem", "31",
    ];
    let o = saddle_flow(&ex52);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("thm31_ok=true"));

    let bad_q = [
        "check", "--alpha", "3", "--q", "1.5", "--s", "0.4", "--p", "2.3", "--c", "5", "--gamma",
        "0.2", "--t0", "1",
    ];
    let o = saddle_flow(&bad_q);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0 < q < 1"));
    assert_eq!(saddle_flow(&["check", "--alpha", "x"]).status.code(), Some(2));
}

#[test]
fn identical_configs_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let cfg = tmp.path().join(format!("{name}.toml"));
        let text = format!(
            r#"
[problem]
kind = "example52"
m = 5
n = 8
seed = 11

[params]
alpha = 3.0
q = 0.6
s = 0.4
p = 2.3
c = 5.0
gamma = 0.2

[horizon]
t_start = 1.0
t_end = 30.0
samples = 60

[initial]
kind = "instance"

[output]
dir = "{}"
plots = false
"#,
            out.display()
        );
        write(&cfg, &text);
        assert_eq!(saddle_flow(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
        csvs.push(fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);

    // a different seed on the command line changes the instance
    let out = tmp.path().join("c");
    let cfg = tmp.path().join("a.toml");
    let o = saddle_flow(&["--seed", "12", "--out", out.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(fs::read(out.join("trajectory.csv")).unwrap(), csvs[0]);
}

#[test]
fn tolerance_flags_reach_the_integrator() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("tol");
    let cfg = tmp.path().join("tol.toml");
    write(&cfg, &example51_config(&out, 0.8, 5.0));
    let o = saddle_flow(&[
        "--rel-tol", "1e-9", "--abs-tol", "1e-12", "run", "--config", cfg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("rel_tol=1e-9") && summary.contains("abs_tol=1e-12"));
}

#[test]
fn single_point_sweep_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let run_out = tmp.path().join("run");
    let cfg = tmp.path().join("run.toml");
    write(&cfg, &example51_config(&run_out, 0.8, 20.0));
    assert_eq!(saddle_flow(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));

    let sweep_out = tmp.path().join("sweep");
    let sweep_cfg = tmp.path().join("sweep.toml");
    let text = example51_config(&sweep_out, 0.8, 20.0) + "\n[[sweep]]\nparam = \"gamma\"\nvalues = [0.8]\n";
    write(&sweep_cfg, &text);
    let o = saddle_flow(&["sweep", "--config", sweep_cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let point = sweep_out.join("gamma=0.8");
    for file in ["trajectory.csv", "summary.txt"] {
        assert_eq!(
            fs::read(run_out.join(file)).unwrap(),
            fs::read(point.join(file)).unwrap(),
            "{file} differs"
        );
    }
    let table = fs::read_to_string(sweep_out.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("gamma=0.8,ok,"));
    assert!(sweep_out.join("gap_overlay.svg").exists());
}

#[test]
fn sweep_with_invalid_point_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.toml");
    let text = example51_config(&tmp.path().join("s"), 0.8, 5.0)
        + "\n[[sweep]]\nparam = \"q\"\nvalues = [0.42, 1.5]\n";
    write(&cfg, &text);
    let o = saddle_flow(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_records_failures_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let cfg = tmp.path().join("sweep.toml");
    // gamma = 0 needs many more evaluations than the cap allows
    let text = example51_config(&out, 0.8, 50.0)
        .replace("[horizon]", "[integrator]\nmax_rhs_evals = 5000\n\n[horizon]")
        + "\n[[sweep]]\nparam = \"gamma\"\nvalues = [0.0, 0.8]\n";
    write(&cfg, &text);
    let o = saddle_flow(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(table.contains("gamma=0,incomplete,"), "{table}");
    assert!(table.contains("gamma=0.8,ok,"), "{table}");
}
