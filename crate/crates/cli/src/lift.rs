use std::path::PathBuf;

use clap::ValueEnum;
use stoqlift::formats::{to_json, KrausFile, MatrixFile, RealMatrixFile};
use stoqlift::kernels::{validate_kernel, StochasticKernel};
use stoqlift::lifts::{
    barandes_column_lift, canonical_lift, check_cptp, compatibility_check, induced_kernel, theta_conjugation_lift,
    KrausMap, Probes,
};
use stoqlift::linalg;

use crate::io::{self, load, CliError, CliResult};
use crate::report::{RunReport, Table};
use crate::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// `K_ij = √Γ_ij |i⟩⟨j|`.
    Canonical,
    /// Single-term conjugation by θ.
    Theta,
    /// Column selectors `θ P̂^β`.
    Barandes,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Canonical => "canonical",
            Method::Theta => "theta",
            Method::Barandes => "barandes",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Kernel to lift (canonical) or to check the lift against (theta, barandes).
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// θ matrix, real or complex.
    #[arg(long)]
    pub theta: Option<PathBuf>,
    /// Write the Kraus operators here.
    #[arg(long)]
    pub kraus_out: Option<PathBuf>,
}

pub fn run(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let kernel = match &args.kernel {
        Some(path) => {
            let file = load::<RealMatrixFile>(report, "kernel", path)?;
            let v = validate_kernel(&file.to_square()?, &s.tol)?;
            let pass = report.check("kernel_stochastic", v.max_negative.max(v.max_column_deviation), s.tol.stoch);
            if !pass {
                return Ok(());
            }
            Some(file.to_kernel(&s.tol)?)
        }
        None => None,
    };
    let theta = match &args.theta {
        Some(path) => Some(load::<MatrixFile>(report, "theta", path)?.to_complex()?),
        None => None,
    };

    let (map, target) = match (args.method, theta) {
        (Method::Canonical, None) => {
            let gamma = kernel.ok_or_else(|| CliError::Usage("--method canonical needs --kernel".into()))?;
            (canonical_lift(&gamma, &s.tol), gamma)
        }
        (Method::Canonical, Some(_)) => {
            return Err(CliError::Usage("--method canonical takes no --theta".into()));
        }
        (_, None) => {
            return Err(CliError::Usage(format!("--method {} needs --theta", args.method.name())));
        }
        (method, Some(theta)) => {
            linalg::ensure_square(&theta)?;
            let modulus = linalg::mod_square(&theta);
            let v = validate_kernel(&modulus, &s.tol)?;
            let pass = report.check(
                "theta_modulus_stochastic",
                v.max_negative.max(v.max_column_deviation),
                s.tol.stoch,
            );
            if !pass {
                return Ok(());
            }
            let map = if method == Method::Theta {
                let lift = theta_conjugation_lift(&theta, &s.tol)?;
                report.check("theta_unitary", lift.unitarity_residual, s.tol.unitary);
                KrausMap::new(vec![theta], &s.tol)?
            } else {
                barandes_column_lift(&theta, &s.tol)?
            };
            let target = match kernel {
                Some(k) => k,
                None => StochasticKernel::new(modulus, &s.tol)?,
            };
            (map, target)
        }
    };

    let cptp = check_cptp(&map, &s.tol);
    report.check("trace_preserving", cptp.trace_residual, s.tol.tp);
    let v = report.verdict("completely_positive", cptp.completely_positive);
    v.residual = Some((-cptp.min_choi_eigenvalue).max(0.0));
    v.limit = Some(cptp.choi_tolerance);

    let compat = compatibility_check(&map, &target, &Probes::Basis, s.decision)?;
    report.check("compatibility", compat.max_residual, s.decision);

    let induced = induced_kernel(&map, &s.tol)?;
    report.table("induced_kernel", Table::matrix(&induced.matrix));
    report.table("target_kernel", Table::matrix(target.matrix()));
    report.artifact("kraus_count", &map.rank());
    let kraus = KrausFile::from_map(&map);
    report.artifact("kraus", &kraus);
    if let Some(path) = &args.kraus_out {
        io::write(path, &format!("{}\n", to_json(&kraus)))?;
    }
    Ok(())
}
