use std::path::PathBuf;

use clap::ValueEnum;
use stoqlift::dynamics::{gksl_superoperator, trace_annihilation_residual};
use stoqlift::formats::{AnyFile, GeneratorFile, KrausFile, MatrixFile, RealMatrixFile, VectorFile};
use stoqlift::kernels::validate_kernel;
use stoqlift::lifts::{check_cptp, SuperOperator};
use stoqlift::linalg::{self, CMatrix};

use crate::io::{load, CliError, CliResult};
use crate::report::RunReport;
use crate::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Kernel,
    Vector,
    Density,
    Superoperator,
    Kraus,
    Generator,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSON input file.
    pub file: PathBuf,
    /// Interpretation of the file. Without it, Kraus and generator files are
    /// recognized by their keys, real `n x 1` matrices are vectors, square real
    /// matrices are kernels and complex `n² x n²` matrices are superoperators.
    #[arg(long = "as", value_enum)]
    pub kind: Option<Kind>,
}

pub fn run(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let kind = match args.kind {
        Some(k) => k,
        None => detect(&load::<AnyFile>(report, "file", &args.file)?)?,
    };
    report.artifact("kind", &format!("{kind:?}").to_lowercase());
    let path = &args.file;
    match kind {
        Kind::Kernel => kernel(&load::<RealMatrixFile>(report, "file", path)?, s, report),
        Kind::Vector => vector(&load::<VectorFile>(report, "file", path)?, s, report),
        Kind::Density => density(&load::<MatrixFile>(report, "file", path)?.to_complex()?, s, report),
        Kind::Superoperator => {
            let m = load::<MatrixFile>(report, "file", path)?.to_complex()?;
            map(&SuperOperator::new(m)?, s, report);
            Ok(())
        }
        Kind::Kraus => {
            map(&load::<KrausFile>(report, "file", path)?.to_map(&s.tol)?, s, report);
            Ok(())
        }
        Kind::Generator => generator(&load::<GeneratorFile>(report, "file", path)?, s, report),
    }
}

fn detect(file: &AnyFile) -> CliResult<Kind> {
    Ok(match file {
        AnyFile::Kraus(_) => Kind::Kraus,
        AnyFile::Generator(_) => Kind::Generator,
        AnyFile::Real(m) => {
            let width = m.rows.first().map_or(0, Vec::len);
            if width == 1 && m.n != 1 {
                Kind::Vector
            } else {
                Kind::Kernel
            }
        }
        AnyFile::Complex(m) => {
            let root = (m.n as f64).sqrt().round() as usize;
            if root >= 2 && root * root == m.n {
                Kind::Superoperator
            } else {
                Kind::Density
            }
        }
    })
}

fn kernel(file: &RealMatrixFile, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let v = validate_kernel(&file.to_square()?, &s.tol)?;
    report.check("nonnegative_entries", v.max_negative, s.tol.prob);
    report.check("unit_column_sums", v.max_column_deviation, s.tol.stoch);
    if let (Some(a), Some(b)) = (file.from_t, file.to_t) {
        if a == b {
            let m = file.to_square()?;
            let dev = linalg::max_abs(&(m - stoqlift::RMatrix::identity(file.n, file.n)));
            report.check("identity_at_equal_times", dev, s.tol.stoch);
        }
    }
    Ok(())
}

fn vector(file: &VectorFile, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let p = file.to_entries()?;
    if p.is_empty() {
        return Err(CliError::Usage("empty vector".into()));
    }
    let neg = p.iter().fold(0.0_f64, |a, &x| a.max(-x));
    let sum: f64 = p.iter().sum();
    report.check("nonnegative_entries", neg, s.tol.prob);
    report.check("unit_sum", (sum - 1.0).abs(), s.tol.stoch);
    Ok(())
}

fn density(m: &CMatrix<f64>, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    linalg::ensure_square(m)?;
    let herm = linalg::hermiticity_residual(m);
    let eig = linalg::hermitian_eigenvalues(&linalg::hermitian_part(m));
    let scale = eig.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));
    report.check("hermitian", herm, s.tol.herm);
    report.check("positive_semidefinite", (-eig[0]).max(0.0), s.tol.psd * scale);
    report.check("unit_trace", (linalg::trace_c(m).re - 1.0).abs(), s.tol.tp);
    Ok(())
}

fn map<M: stoqlift::lifts::LinearMap<f64>>(m: &M, s: &Settings, report: &mut RunReport) {
    let c = check_cptp(m, &s.tol);
    report.check("trace_preserving", c.trace_residual, s.tol.tp);
    let v = report.verdict("completely_positive", c.completely_positive);
    v.residual = Some((-c.min_choi_eigenvalue).max(0.0));
    v.limit = Some(c.choi_tolerance);
}

fn generator(file: &GeneratorFile, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let h = file.h.to_complex()?;
    linalg::ensure_square(&h)?;
    report.check("hamiltonian_hermitian", linalg::hermiticity_residual(&h), s.tol.herm);
    if !report.pass() {
        return Ok(());
    }
    let gen = file.to_generator(&s.tol)?;
    let residual = trace_annihilation_residual(&gksl_superoperator(&gen));
    report.check("trace_annihilating", residual, s.tol.tp);
    Ok(())
}
