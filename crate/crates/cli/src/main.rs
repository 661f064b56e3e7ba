//! `stoqlift`: file-driven validation, lifting, divisibility analysis and
//! demonstrations. Prints a JSON report on stdout and a summary on stderr.
//!
//! Exit codes: 0 every verdict passed, 1 a domain check failed, 2 the
//! command line or an input file could not be used.

mod demo;
mod divisibility;
mod io;
mod lift;
mod report;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stoqlift::Tolerances;

use crate::io::{CliError, CliResult};
use crate::report::RunReport;

/// Decision tolerance used when `--tol` is absent.
pub const DEFAULT_DECISION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "stoqlift", version, about = "Stochastic kernels, their quantum lifts and divisibility checks")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Overrides every validation and decision tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a kernel, vector, density operator or map file.
    Validate(validate::Args),
    /// Lift a kernel (or a θ matrix) to a Kraus map.
    Lift(lift::Args),
    /// Classical, quantum, diagonal-intermediate or environment divisibility.
    Divisibility(divisibility::Args),
    /// Run a named demonstration.
    Demo(demo::Args),
}

/// Tolerances derived from the global flags.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub seed: u64,
    pub tol: Tolerances,
    /// Threshold for residual-based verdicts.
    pub decision: f64,
    /// Whether `--tol` was given.
    pub overridden: bool,
}

impl Settings {
    /// `--tol` when given, `default` otherwise.
    pub fn or(&self, default: f64) -> f64 {
        if self.overridden {
            self.decision
        } else {
            default
        }
    }
}

fn run(cli: &Cli, report: &mut RunReport) -> CliResult<()> {
    let settings = match cli.tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => {
            return Err(CliError::Usage(format!("--tol must be positive and finite, got {t}")))
        }
        Some(t) => Settings {
            seed: cli.seed,
            tol: Tolerances::uniform(t),
            decision: t,
            overridden: true,
        },
        None => Settings {
            seed: cli.seed,
            tol: Tolerances::default(),
            decision: DEFAULT_DECISION_TOLERANCE,
            overridden: false,
        },
    };
    match &cli.command {
        Command::Validate(a) => validate::run(a, &settings, report),
        Command::Lift(a) => lift::run(a, &settings, report),
        Command::Divisibility(a) => divisibility::run(a, &settings, report),
        Command::Demo(a) => demo::run(a, &settings, report),
    }
}

fn command_name(command: &Command) -> String {
    match command {
        Command::Validate(_) => "validate".into(),
        Command::Lift(a) => format!("lift {}", a.method.name()),
        Command::Divisibility(a) => format!("divisibility {}", a.mode.name()),
        Command::Demo(a) => format!("demo {}", a.name.name()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut report = RunReport::new(&command_name(&cli.command), cli.seed);
    if let Err(e) = run(&cli, &mut report) {
        match e {
            CliError::Usage(_) => {
                eprintln!("{e}");
                return ExitCode::from(e.exit_code());
            }
            CliError::Domain(ref msg) => {
                report.note("preconditions", false, msg.clone());
            }
        }
    }
    let json = report.to_json();
    if let Some(path) = &cli.out {
        if let Err(e) = io::write(path, &format!("{json}\n")) {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    }
    println!("{json}");
    eprint!("{}", report.summary());
    ExitCode::from(if report.pass() { 0 } else { 1 })
}
