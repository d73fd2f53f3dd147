//! Command-line front end: certify, solve, simulate.
//!
//! Exit codes: 0 success, 2 bad command line, 3 input files that fail to
//! load or validate, 4 numerical failure in an otherwise valid problem
//! (an indefinite cost matrix, non-finite values produced mid-solve).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use certiqp::certificate::{flop_budget, iteration_certificate};
use certiqp::mpc::double_integrator_preset;
use certiqp::penalty::{saturated_hard_rows, solve_soft_qp};
use certiqp::sim::{self, SimConfig};
use certiqp::Error;

mod files;

const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "certiqp",
    version,
    about = "Certified fixed-iteration QP solving with soft constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the a-priori iteration count (and, with --m, the flop budget)
    /// for a problem size, before any problem data exists.
    Certify(CertifyArgs),
    /// Solve one soft-constrained QP from a problem file.
    Solve(SolveArgs),
    /// Run a closed-loop MPC simulation and emit the trajectory as CSV.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct CertifyArgs {
    /// Number of box variables (constraint rows after the transform).
    #[arg(long)]
    n: usize,
    /// Duality-gap tolerance.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Decision-variable count; enables the full flop budget.
    #[arg(long)]
    m: Option<usize>,
    /// Price for a one-shot solve instead of a cached time-invariant
    /// deployment (requires --m).
    #[arg(long, requires = "m")]
    one_shot: bool,
    /// Sustained flop rate of the target machine (flops/second), for a
    /// per-solve time estimate.
    #[arg(long)]
    rate: Option<f64>,
    /// Emit the certificate as JSON instead of key-value text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Write the solution here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["config", "preset"]))]
struct SimulateArgs {
    /// Simulation configuration file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario; currently `double-integrator`.
    #[arg(long)]
    preset: Option<String>,
    /// Penalty weight on input bounds (preset only).
    #[arg(long, default_value_t = 100.0, conflicts_with = "config")]
    rho_hard: f64,
    /// Penalty weight on state corridors (preset only).
    #[arg(long, default_value_t = 10.0, conflicts_with = "config")]
    rho_soft: f64,
    /// Prediction horizon (preset only).
    #[arg(long, default_value_t = 10, conflicts_with = "config")]
    horizon: usize,
    /// Closed-loop steps (preset only).
    #[arg(long, default_value_t = 60, conflicts_with = "config")]
    steps: usize,
    /// Initial state, comma-separated (preset only).
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_values_t = [0.0, -2.0],
        conflicts_with = "config"
    )]
    x0: Vec<f64>,
    /// Duality-gap tolerance (preset only).
    #[arg(long, default_value_t = 1e-6, conflicts_with = "config")]
    epsilon: f64,
    /// Sustained flop rate for the certificate's time estimate.
    #[arg(long)]
    rate: Option<f64>,
    /// Write the trajectory CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    /// A solver error on already-validated inputs: numerical breakdowns
    /// keep their own exit code, anything else is a validation failure.
    fn solver(error: Error) -> Self {
        Self {
            code: numerical_exit_code(&error),
            message: error.to_string(),
        }
    }
}

fn numerical_exit_code(error: &Error) -> u8 {
    match error {
        Error::NotPositiveDefinite { .. } | Error::NonFiniteData { .. } => EXIT_NUMERICAL,
        Error::SimulationStep { source, .. } => numerical_exit_code(source),
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify(args) => certify(args),
        Command::Solve(args) => solve(args),
        Command::Simulate(args) => simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn check_rate(rate: Option<f64>) -> Result<(), Failure> {
    if let Some(r) = rate {
        if !r.is_finite() || r <= 0.0 {
            return Err(Failure::usage(format!(
                "--rate must be positive, got {r}"
            )));
        }
    }
    Ok(())
}

fn certify(args: CertifyArgs) -> Result<(), Failure> {
    check_rate(args.rate)?;
    let certificate = match args.m {
        Some(m) => flop_budget(m, args.n, args.epsilon, !args.one_shot),
        None => iteration_certificate(args.n, args.epsilon),
    }
    .map_err(|e| Failure::usage(e.to_string()))?;
    let certificate = match args.rate {
        Some(rate) => certificate.with_rate(rate),
        None => certificate,
    };
    if args.json {
        println!("{}", certificate.to_json());
    } else {
        print!("{}", certificate.to_text());
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let loaded = files::load_problem(&args.problem).map_err(Failure::validation)?;
    for warning in loaded.rho.advisory_warnings() {
        eprintln!("warning: {warning}");
    }
    let result =
        solve_soft_qp(&loaded.qp, &loaded.rho, loaded.epsilon).map_err(Failure::solver)?;
    for row in saturated_hard_rows(&result, &loaded.rho) {
        eprintln!(
            "warning: hard row {row} saturated its penalty; the bound may be violated \
             — increase its rho"
        );
    }
    let solution = files::SolutionFile::from(&result);
    let mut json = serde_json::to_string_pretty(&solution).expect("solution serializes");
    json.push('\n');
    match &args.out {
        Some(path) => fs::write(path, json).map_err(|e| {
            Failure::validation(format!("writing {}: {e}", path.display()))
        })?,
        None => print!("{json}"),
    }
    eprintln!(
        "solved: {} iterations, duality gap {:.3e}, {} flops",
        result.iterations,
        result.duality_gap,
        result.flops.online_total(false)
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    check_rate(args.rate)?;
    let config = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::validation(format!("reading {}: {e}", path.display()))
            })?;
            let mut config: SimConfig = serde_json::from_str(&text)
                .map_err(|e| Failure::validation(format!("simulation config: {e}")))?;
            if args.rate.is_some() {
                config.flops_per_second = args.rate;
            }
            config
        }
        (None, Some(name)) => {
            if name != "double-integrator" {
                return Err(Failure::usage(format!(
                    "unknown preset `{name}` (available: double-integrator)"
                )));
            }
            let (plant, mpc) = double_integrator_preset(args.rho_hard, args.rho_soft, args.horizon);
            SimConfig {
                plant,
                mpc,
                x0: args.x0.clone(),
                steps: args.steps,
                epsilon: args.epsilon,
                flops_per_second: args.rate,
            }
        }
        (None, None) => unreachable!("clap enforces the source group"),
    };

    let trajectory = sim::run(&config).map_err(Failure::solver)?;
    let csv = trajectory.csv_string();
    match &args.out {
        Some(path) => fs::write(path, csv).map_err(|e| {
            Failure::validation(format!("writing {}: {e}", path.display()))
        })?,
        None => print!("{csv}"),
    }

    let summary = trajectory.summary();
    eprintln!("certificate:");
    for line in trajectory.certificate.to_text().lines() {
        eprintln!("  {line}");
    }
    eprintln!(
        "ran {} steps: max |u| = {:.6}, max soft violation = {:.6}, max hard violation = {:.3e}, \
         iterations {}..{}, final state {:?}",
        trajectory.steps.len(),
        summary.max_abs_input,
        summary.max_soft_violation,
        summary.max_hard_violation,
        summary.iterations_range.0,
        summary.iterations_range.1,
        summary.final_state
    );
    Ok(())
}
