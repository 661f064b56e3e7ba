use std::path::{Path, PathBuf};

use clap::ValueEnum;
use stoqlift::division::{environment_division_scenario, theorem1_check};
use stoqlift::formats::{ComplexMatrixFile, DivisionScenarioFile, MapFile, RealMatrixFile};
use stoqlift::kernels::{c_divisibility_check, CDivisibility, DivisionRoute, ViolatedConstraint};
use stoqlift::lifts::{q_divisibility_check, LinearMap, QDivisibility, QObstruction, QRoute, SuperOperator};

use crate::io::{load, CliError, CliResult};
use crate::report::{RunReport, Table};
use crate::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Stochastic factor of two kernels (`--g10`, `--g20`).
    Classical,
    /// Channel factor of two maps (`--e10`, `--e20`).
    Quantum,
    /// Quantum factor with diagonal intermediate states (`--e10`, `--e20`).
    Theorem1,
    /// Record-form interaction with an environment (`--scenario`).
    Environment,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::Quantum => "quantum",
            Mode::Theorem1 => "theorem1",
            Mode::Environment => "environment",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Kernel `Γ(t1←t0)`.
    #[arg(long)]
    pub g10: Option<PathBuf>,
    /// Kernel `Γ(t2←t0)`.
    #[arg(long)]
    pub g20: Option<PathBuf>,
    /// Map `E(t1,t0)`, Kraus or superoperator.
    #[arg(long)]
    pub e10: Option<PathBuf>,
    /// Map `E(t2,t0)`, Kraus or superoperator.
    #[arg(long)]
    pub e20: Option<PathBuf>,
    /// Environment scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str, mode: Mode) -> CliResult<&'a PathBuf> {
    path.as_ref()
        .ok_or_else(|| CliError::Usage(format!("--mode {} needs --{flag}", mode.name())))
}

fn load_map(report: &mut RunReport, key: &str, path: &Path, s: &Settings) -> CliResult<SuperOperator<f64>> {
    Ok(load::<MapFile>(report, key, path)?.to_superoperator(&s.tol)?)
}

pub fn run(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    match args.mode {
        Mode::Classical => {
            let g10 = load::<RealMatrixFile>(report, "g10", required(&args.g10, "g10", args.mode)?)?;
            let g20 = load::<RealMatrixFile>(report, "g20", required(&args.g20, "g20", args.mode)?)?;
            let (g10, g20) = (g10.to_kernel(&s.tol)?, g20.to_kernel(&s.tol)?);
            let verdict = c_divisibility_check(&g20, &g10, s.decision, &s.tol)?;
            c_verdict(&verdict, report);
        }
        Mode::Quantum => {
            let e10 = load_map(report, "e10", required(&args.e10, "e10", args.mode)?, s)?;
            let e20 = load_map(report, "e20", required(&args.e20, "e20", args.mode)?, s)?;
            let verdict = q_divisibility_check(&e20, &e10, s.decision, &s.tol)?;
            quantum(&verdict, report);
        }
        Mode::Theorem1 => {
            let e10 = load_map(report, "e10", required(&args.e10, "e10", args.mode)?, s)?;
            let e20 = load_map(report, "e20", required(&args.e20, "e20", args.mode)?, s)?;
            let v = theorem1_check(&e10, &e20, s.decision, &s.tol)?;
            report.note("q_divisible", v.q_divisible, q_label(&v.q_divisibility));
            report.check("diagonal_at_t1", v.max_off_diagonal_mass, s.decision);
            report.table("gamma_10", Table::matrix(v.gamma_10.matrix()));
            report.table("gamma_20", Table::matrix(v.gamma_20.matrix()));
            if let Some(w) = v.q_divisibility.witness() {
                report.artifact("quantum_witness", &ComplexMatrixFile::from_matrix(w.matrix()));
            }
            report.note(
                "theorem_applies",
                v.theorem_applies,
                if v.theorem_applies {
                    "classical factor read off the quantum factor"
                } else {
                    "hypotheses not met; classical verdict from the direct test"
                },
            );
            let (c_divisible, _, detail) = classical(&v.c_divisibility, report);
            report.artifact("c_divisible", &c_divisible);
            report.artifact("c_divisibility", &detail);
        }
        Mode::Environment => {
            let file = load::<DivisionScenarioFile>(report, "scenario", required(&args.scenario, "scenario", args.mode)?)?;
            let p_env = file.p_env.to_probability(&s.tol)?;
            let interaction = file.interaction.to_superoperator(&s.tol)?;
            let post_sys = file.post_sys.to_superoperator(&s.tol)?;
            let post_env = file.post_env.to_superoperator(&s.tol)?;
            if post_sys.dim() != file.n_sys || post_env.dim() != file.n_env {
                return Err(CliError::Usage(format!(
                    "declared dimensions {}x{} do not match the maps ({}x{})",
                    file.n_sys,
                    file.n_env,
                    post_sys.dim(),
                    post_env.dim()
                )));
            }
            let r = environment_division_scenario(&p_env, &interaction, &post_sys, &post_env, s.decision, &s.tol)?;
            let mut records = Table::new(&["initial_state", "block_off_diagonal_mass", "reduced_off_diagonal_mass"]);
            for c in &r.record_checks {
                records.push(vec![c.initial_state as f64, c.block_off_diagonal_mass, c.reduced_off_diagonal_mass]);
            }
            report.table("record_checks", records);
            report.note("record_form", r.record_form, "joint state at t1 is block diagonal in the system basis");
            report.table("gamma_10", Table::matrix(r.gamma_10.matrix()));
            report.table("gamma_20", Table::matrix(r.gamma_20.matrix()));
            report.table("post_system_kernel", Table::matrix(&r.post_system_kernel));
            report.artifact("post_system_residual", &r.post_system_residual);
            c_verdict(&r.c_divisibility, report);
        }
    }
    Ok(())
}

fn route_name(route: DivisionRoute) -> &'static str {
    match route {
        DivisionRoute::Inverse => "inverse",
        DivisionRoute::LinearFeasibility => "linear-feasibility",
        DivisionRoute::QuantumWitness => "quantum-witness",
    }
}

/// Adds the witness or certificate tables; returns `(divisible, residual, detail)`.
fn classical(v: &CDivisibility<f64>, report: &mut RunReport) -> (bool, f64, String) {
    match v {
        CDivisibility::Divisible { witness, route, residual } => {
            report.table("witness", Table::matrix(witness.matrix()));
            (true, *residual, format!("route {}", route_name(*route)))
        }
        CDivisibility::Indivisible(cert) => {
            let mut table = Table::new(&["kind", "row", "col", "value"]);
            for c in &cert.violated {
                table.push(match *c {
                    ViolatedConstraint::NegativeEntry { row, col, value } => vec![0.0, row as f64, col as f64, value],
                    ViolatedConstraint::ColumnSum { col, deviation } => vec![1.0, f64::NAN, col as f64, deviation],
                    ViolatedConstraint::Factorization { row, col, slack } => {
                        vec![2.0, row as f64, col as f64, slack]
                    }
                });
            }
            report.table("violated_constraints", table);
            let detail = format!(
                "indivisible via {}; constraint kinds: 0 negative entry, 1 column sum, 2 factorization",
                route_name(cert.route)
            );
            (false, cert.residual, detail)
        }
    }
}

fn c_verdict(v: &CDivisibility<f64>, report: &mut RunReport) {
    let (pass, residual, detail) = classical(v, report);
    let verdict = report.verdict("c_divisible", pass);
    verdict.residual = Some(residual);
    verdict.detail = Some(detail);
}

fn q_label(v: &QDivisibility<f64>) -> String {
    match v {
        QDivisibility::Divisible { route, .. } => format!(
            "divisible via {}",
            match route {
                QRoute::Inverse => "inverse",
                QRoute::PseudoInverse => "pseudo-inverse",
            }
        ),
        QDivisibility::Indivisible(QObstruction::RankDeficit { rank_10, rank_20 }) => {
            format!("indivisible: rank {rank_10} < {rank_20}")
        }
        QDivisibility::Indivisible(QObstruction::RangeMismatch { residual }) => {
            format!("indivisible: range mismatch {residual:.3e}")
        }
        QDivisibility::Indivisible(QObstruction::UniqueFactorNotCptp { cptp }) => format!(
            "indivisible: unique factor not CPTP (min Choi eigenvalue {:.3e}, trace residual {:.3e})",
            cptp.min_choi_eigenvalue, cptp.trace_residual
        ),
        QDivisibility::Inconclusive { reason, .. } => format!("inconclusive: {reason}"),
    }
}

fn quantum(v: &QDivisibility<f64>, report: &mut RunReport) {
    report.note("q_divisible", v.is_divisible(), q_label(v));
    match v {
        QDivisibility::Divisible { witness, .. } => {
            report.artifact("witness", &ComplexMatrixFile::from_matrix(witness.matrix()));
        }
        QDivisibility::Inconclusive { candidate, .. } => {
            report.artifact("candidate", &ComplexMatrixFile::from_matrix(candidate.matrix()));
        }
        QDivisibility::Indivisible(_) => {}
    }
}
