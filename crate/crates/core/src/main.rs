use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use saddle_flow::dynamics::DynamicsParams;
use saddle_flow::expcli::config::DEFAULT_SEED;
use saddle_flow::expcli::{
    cmd_check, cmd_run, cmd_sweep, example51_sweep, example52_sweep, CliError, Overrides,
    RunConfig, SweepConfig, SweepReport, Theorem,
};

#[derive(Debug, Parser)]
#[command(
    name = "saddle-flow",
    version,
    about = "Simulate Tikhonov-regularized inertial primal-dual dynamics with Hessian-driven damping"
)]
struct Cli {
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random instances and random initial data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative integrator tolerance.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Absolute integrator tolerance.
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TheoremArg {
    #[value(name = "31")]
    FixedAnchor,
    #[value(name = "42")]
    Strong,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration file.
    Run {
        /// TOML run configuration
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a sweep configuration file.
    Sweep {
        /// TOML run configuration with one or two [[sweep]] axes
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the parameter hypotheses.
    Check {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        t0: f64,
        #[arg(long, value_enum)]
        theorem: Option<TheoremArg>,
    },
    /// Two-variable rank-one example on [1, 50].
    Example51 {
        #[arg(long, num_args = 1.., default_values_t = [0.0, 0.8, 1.0, 1.2, 1.4])]
        gamma: Vec<f64>,
        #[arg(long, num_args = 1.., default_values_t = [10.0])]
        c: Vec<f64>,
    },
    /// Seeded Gaussian regularized least squares on [1, 200].
    Example52 {
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, num_args = 1.., default_values_t = [0.6, 0.7, 0.8])]
        q: Vec<f64>,
        #[arg(long, num_args = 1.., default_values_t = [0.0, 0.2])]
        gamma: Vec<f64>,
    },
}

fn sweep_and_report(mut cfg: SweepConfig, overrides: &Overrides) -> Result<i32, CliError> {
    overrides.apply_sweep(&mut cfg);
    let report: SweepReport = cmd_sweep(&cfg)?;
    print!("{}", report.table());
    for row in &report.rows {
        if let saddle_flow::expcli::runner::PointStatus::Incomplete(reason)
        | saddle_flow::expcli::runner::PointStatus::Failed(reason) = &row.status
        {
            eprintln!("{}: {reason}", row.label);
        }
    }
    println!("output: {}", report.dir.display());
    Ok(report.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        rel_tol: cli.rel_tol,
        abs_tol: cli.abs_tol,
    };
    match cli.command {
        Command::Run { config } => {
            let mut cfg = RunConfig::load(&config)?;
            overrides.apply_run(&mut cfg);
            let outcome = cmd_run(&cfg)?;
            if let Some(reason) = &outcome.abort {
                eprintln!("integration aborted, partial output written: {reason}");
            }
            println!("output: {}", outcome.dir.display());
            Ok(outcome.exit_code())
        }
        Command::Sweep { config } => sweep_and_report(SweepConfig::load(&config)?, &overrides),
        Command::Check {
            alpha,
            q,
            s,
            p,
            c,
            gamma,
            t0,
            theorem,
        } => {
            let params = DynamicsParams {
                alpha,
                q,
                s,
                p,
                c,
                gamma,
                t0,
            };
            let theorem = theorem.map(|t| match t {
                TheoremArg::FixedAnchor => Theorem::FixedAnchor,
                TheoremArg::Strong => Theorem::Strong,
            });
            let outcome = cmd_check(&params, theorem)?;
            print!("{}", outcome.text);
            Ok(outcome.exit_code)
        }
        Command::Example51 { gamma, c } => {
            let out = overrides.out.clone().unwrap_or_else(|| "out/example51".into());
            sweep_and_report(example51_sweep(gamma, c, out), &overrides)
        }
        Command::Example52 { m, n, q, gamma } => {
            let out = overrides.out.clone().unwrap_or_else(|| "out/example52".into());
            let seed = overrides.seed.unwrap_or(DEFAULT_SEED);
            sweep_and_report(example52_sweep(m, n, seed, q, gamma, out), &overrides)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
