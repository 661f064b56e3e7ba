use std::path::PathBuf;

use clap::ValueEnum;
use stoqlift::dynamics::{
    ck_checklist, ctmc_embedding, diagonal_preservation_check, propagate, SuperOperatorFamily, DEFAULT_CK_GRID,
    DEFAULT_CK_TOLERANCE, DEFAULT_FD_STEP,
};
use stoqlift::formats::{GeneratorFile, KernelFamilyFile, MatrixFile, PhaseMemoryFile, RealMatrixFile};
use stoqlift::kernels::{ctmc_propagate, dtmc_to_ctmc_scaling, theta_markov_triviality_demo, RateMatrix};
use stoqlift::lifts::embed_diagonal;
use stoqlift::linalg::{self, gates, CMatrix};
use stoqlift::memory::{mod_square, one_step_indistinguishable, two_step_difference, two_step_kernel};
use stoqlift::random::Sampler;
use stoqlift::RMatrix;

use crate::io::{load, CliError, CliResult};
use crate::report::{RunReport, Table};
use crate::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    /// Leave-probability bound `n α(t/n)` of a θ-process split into `n` steps.
    ThetaTriviality,
    /// Accelerated discrete-time chain against `exp(tR)`.
    Scaling,
    /// One-step indistinguishable unitaries told apart after two steps.
    PhaseMemory,
    /// Diagonal propagation of the embedded generator against `exp(tR)`.
    CtmcEmbedding,
    /// Diagonal normalization and forward-equation checks on a family.
    CkChecklist,
}

impl Demo {
    pub fn name(self) -> &'static str {
        match self {
            Demo::ThetaTriviality => "theta-triviality",
            Demo::Scaling => "scaling",
            Demo::PhaseMemory => "phase-memory",
            Demo::CtmcEmbedding => "ctmc-embedding",
            Demo::CkChecklist => "ck-checklist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    /// `exp(−iH(t−s))` conjugation; `--file` holds `H`.
    Unitary,
    /// `exp((t−s) L)`; `--file` holds a generator.
    Gksl,
    /// Canonical lift of each kernel; `--file` holds a kernel family.
    PairwiseLift,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    pub name: Demo,
    /// Input overriding the built-in example: Hamiltonian (theta-triviality,
    /// ck-checklist unitary), rate matrix (scaling, ctmc-embedding), phase-memory
    /// scenario, generator or kernel family (ck-checklist).
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Elapsed time `t − s` (theta-triviality, scaling).
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Sub-interval counts for theta-triviality.
    #[arg(long, value_delimiter = ',', default_values_t = [10u32, 100, 1000, 10000])]
    pub n: Vec<u32>,
    /// Micro-step scale `t*` for scaling.
    #[arg(long, default_value_t = 1.0)]
    pub t_star: f64,
    /// Step parameters ε for scaling.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025])]
    pub eps: Vec<f64>,
    /// Initial configuration (0-based) for phase-memory.
    #[arg(long, default_value_t = 0)]
    pub x0: usize,
    /// Random draws for ctmc-embedding without `--file`.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    /// State count for random draws in ctmc-embedding.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = FamilyKind::Unitary)]
    pub family: FamilyKind,
    /// Grid for ck-checklist (a kernel family file carries its own).
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// Finite-difference step for ck-checklist.
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    pub fd_step: f64,
}

pub fn run(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    match args.name {
        Demo::ThetaTriviality => theta_triviality(args, s, report),
        Demo::Scaling => scaling(args, s, report),
        Demo::PhaseMemory => phase_memory(args, s, report),
        Demo::CtmcEmbedding => ctmc(args, s, report),
        Demo::CkChecklist => ck(args, s, report),
    }
}

fn hamiltonian(args: &Args, report: &mut RunReport) -> CliResult<CMatrix<f64>> {
    Ok(match &args.file {
        Some(path) => load::<MatrixFile>(report, "file", path)?.to_complex()?,
        None => gates::pauli_x(),
    })
}

fn rate(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<RateMatrix<f64>> {
    Ok(match &args.file {
        Some(path) => load::<RealMatrixFile>(report, "file", path)?.to_rate(&s.tol)?,
        None => RateMatrix::new(RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]), &s.tol)?,
    })
}

fn theta_triviality(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let h = hamiltonian(args, report)?;
    linalg::ensure_square(&h)?;
    let rows = theta_markov_triviality_demo(|dt| gates::evolution(&h, dt), args.t, &args.n, &s.tol)?;
    let mut table = Table::new(&["n", "step", "alpha", "bound", "product_distance"]);
    for r in &rows {
        table.push(vec![r.n as f64, r.step, r.alpha, r.bound, r.product_distance]);
    }
    report.table("triviality", table);

    let slack = rows
        .iter()
        .fold(0.0_f64, |a, r| a.max(r.product_distance - r.bound));
    report.check("bound_dominates_distance", slack.max(0.0), s.decision);

    // bound ~ (t−s)²/n for small steps: each tenfold refinement divides it by about ten
    let mut decay = Table::new(&["n_from", "n_to", "bound_ratio", "n_ratio"]);
    let mut worst = 0.0_f64;
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let ratio = a.bound / b.bound;
        let expected = b.n as f64 / a.n as f64;
        decay.push(vec![a.n as f64, b.n as f64, ratio, expected]);
        worst = worst.max((ratio / expected - 1.0).abs());
    }
    report.table("bound_decay", decay);
    report.check("bound_scales_inversely_with_n", worst, 0.2);
    Ok(())
}

fn scaling(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let r = rate(args, s, report)?;
    let table = dtmc_to_ctmc_scaling(&r, args.t_star, args.t, &args.eps, &s.tol)?;
    let mut out = Table::new(&["epsilon", "n_steps", "error", "error_ratio", "expected_ratio"]);
    let mut worst = 0.0_f64;
    for (i, row) in table.rows.iter().enumerate() {
        let (ratio, expected) = match i {
            0 => (f64::NAN, f64::NAN),
            _ => {
                let prev = &table.rows[i - 1];
                let ratio = prev.error / row.error;
                let expected = (prev.epsilon / row.epsilon).powi(2);
                worst = worst.max((ratio / expected - 1.0).abs());
                (ratio, expected)
            }
        };
        out.push(vec![row.epsilon, row.n_steps as f64, row.error, ratio, expected]);
    }
    report.table("scaling", out);
    report.note("errors_decrease_with_epsilon", table.monotone_decreasing, "monotone in ε");
    report.check("error_ratio_matches_epsilon_squared", worst, 0.25);
    Ok(())
}

fn phase_memory(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let (u_x, u_y, v) = match &args.file {
        Some(path) => {
            let f = load::<PhaseMemoryFile>(report, "file", path)?;
            (f.u_x.to_complex()?, f.u_y.to_complex()?, f.v.to_complex()?)
        }
        None => {
            let h = gates::hadamard::<f64>();
            (h.clone(), gates::phase_s() * &h, h)
        }
    };
    let one_step = linalg::max_abs(&(mod_square(&u_x) - mod_square(&u_y)));
    report.check("one_step_indistinguishable", one_step, s.decision);
    if !one_step_indistinguishable(&u_x, &u_y, s.decision, &s.tol)? {
        return Ok(());
    }
    report.table("one_step_x", Table::matrix(&mod_square(&u_x)));
    report.table("one_step_y", Table::matrix(&mod_square(&u_y)));
    let gamma_1 = two_step_kernel(&v, &u_x, &s.tol)?;
    let gamma_2 = two_step_kernel(&v, &u_y, &s.tol)?;
    report.table("two_step_x", Table::matrix(&gamma_1));
    report.table("two_step_y", Table::matrix(&gamma_2));
    let diff = two_step_difference(&v, &u_x, &u_y, args.x0, s.decision, &s.tol)?;
    let mut column = Table::new(&["x2", "difference"]);
    for (i, d) in diff.iter().enumerate() {
        column.push(vec![i as f64, *d]);
    }
    report.table("difference_column", column);
    let gap = diff.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
    let verdict = report.verdict("two_step_distinguishable", gap > s.decision);
    verdict.residual = Some(gap);
    verdict.limit = Some(s.decision);
    verdict.detail = Some(format!("largest two-step difference from x0 = {} must exceed the limit", args.x0));
    Ok(())
}

fn ctmc(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let mut sampler = Sampler::new(s.seed);
    let cases: Vec<RateMatrix<f64>> = match &args.file {
        Some(_) => vec![rate(args, s, report)?],
        None => {
            if args.dim < 2 || args.samples == 0 {
                return Err(CliError::Usage("--dim must be at least 2 and --samples positive".into()));
            }
            (0..args.samples).map(|_| sampler.rate_matrix(args.dim, 1.0)).collect()
        }
    };
    let limit = s.or(1e-10);
    let mut table = Table::new(&["case", "t", "max_deviation", "diagonal_preservation"]);
    let (mut worst_dev, mut worst_diag) = (0.0_f64, 0.0_f64);
    for (i, r) in cases.iter().enumerate() {
        let n = r.dim();
        let p0 = sampler.probability_vector::<f64>(n);
        let t = sampler.uniform(0.1, 2.0);
        let gen = ctmc_embedding(r, None)?;
        let rho = propagate(&gen, &embed_diagonal(&p0), t, &s.tol)?;
        let p = ctmc_propagate(r, &p0, t, &s.tol)?;
        let dev = (0..n).fold(0.0_f64, |a, j| {
            a.max((rho.matrix()[(j, j)].re - p.entries()[j]).abs())
                .max(rho.matrix()[(j, j)].im.abs())
        });
        let dev = dev.max(linalg::off_diagonal_mass(rho.matrix()));
        let diag = diagonal_preservation_check(&gen, 4, limit, s.seed.wrapping_add(i as u64))?;
        table.push(vec![i as f64, t, dev, diag.max_residual]);
        worst_dev = worst_dev.max(dev);
        worst_diag = worst_diag.max(diag.max_residual);
    }
    report.table("embedding", table);
    report.check("diagonal_propagation_matches", worst_dev, limit);
    report.check("generator_preserves_diagonals", worst_diag, limit);
    Ok(())
}

fn ck(args: &Args, s: &Settings, report: &mut RunReport) -> CliResult<()> {
    let grid = if args.grid.is_empty() {
        DEFAULT_CK_GRID.to_vec()
    } else {
        args.grid.clone()
    };
    let family = match (args.family, &args.file) {
        (FamilyKind::Unitary, _) => SuperOperatorFamily::unitary(grid, hamiltonian(args, report)?)?,
        (FamilyKind::Gksl, Some(path)) => {
            let gen = load::<GeneratorFile>(report, "file", path)?.to_generator(&s.tol)?;
            SuperOperatorFamily::from_generator(grid, &gen)?
        }
        (FamilyKind::PairwiseLift, Some(path)) => {
            let file = load::<KernelFamilyFile>(report, "file", path)?;
            SuperOperatorFamily::pairwise_lift(file.to_family(&s.tol)?, file.dim())?
        }
        (_, None) => return Err(CliError::Usage("--family gksl and pairwise-lift need --file".into())),
    };
    let limit = s.or(DEFAULT_CK_TOLERANCE);
    let c = ck_checklist(&family, args.fd_step, limit)?;
    let mut a = Table::new(&["s", "residual"]);
    for (t, r) in &c.check_a {
        a.push(vec![*t, *r]);
    }
    let mut fwd = Table::new(&["t", "s", "residual"]);
    for r in &c.check_c {
        fwd.push(vec![r.t, r.s, r.residual]);
    }
    report.table("check_a", a);
    report.table("check_c", fwd);
    report.artifact("stencil_error", &c.stencil_error);
    report.artifact("fd_step", &args.fd_step);
    report.check("diagonal_normalization", c.max_a, limit);
    report.check("forward_equation", c.max_c, limit);
    Ok(())
}
