//! Probability vectors, column-stochastic transition kernels and the
//! classical side of divisibility.
//!
//! Kernels act on probability column vectors from the left:
//! `p(t) = Γ(t←s) p(s)`, with every column of `Γ` a probability
//! distribution.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::scalar::Real;
use crate::simplex::{LinearProgram, LpOutcome};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T: Real> {
    entries: DVector<T>,
}

impl<T: Real> ProbabilityVector<T> {
    pub fn new(entries: Vec<T>, tol: &Tolerances) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(entries), tol)
    }

    /// Validates `entries`; negatives within `tol.prob` are clamped to zero.
    pub fn from_dvector(mut entries: DVector<T>, tol: &Tolerances) -> Result<Self> {
        let eps = T::lit(tol.prob);
        let mut max_negative = T::zero();
        for x in entries.iter_mut() {
            if *x < T::zero() {
                max_negative = max_negative.max(-*x);
                if -*x <= eps {
                    *x = T::zero();
                }
            }
        }
        let sum_deviation = (entries.sum() - T::one()).abs();
        if max_negative > eps || sum_deviation > eps || entries.is_empty() {
            return Err(Error::InvalidProbability {
                max_negative: max_negative.as_f64(),
                sum_deviation: sum_deviation.as_f64(),
            });
        }
        Ok(Self { entries })
    }

    /// Point mass on configuration `i`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut entries = DVector::zeros(n);
        entries[i] = T::one();
        Self { entries }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            entries: DVector::from_element(n, T::one() / T::from_usize_lossy(n)),
        }
    }

    pub fn entries(&self) -> &DVector<T> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn into_inner(self) -> DVector<T> {
        self.entries
    }
}

/// Residuals of the column-stochastic checks for a square matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValidation<T> {
    pub pass: bool,
    /// Magnitude of the most negative entry (zero when none is negative).
    pub max_negative: T,
    pub max_column_deviation: T,
}

impl<T: Real> KernelValidation<T> {
    fn into_error(self) -> Error {
        Error::NotStochastic {
            max_negative: self.max_negative.as_f64(),
            max_column_deviation: self.max_column_deviation.as_f64(),
        }
    }
}

pub fn validate_kernel<T: Real>(matrix: &RMatrix<T>, tol: &Tolerances) -> Result<KernelValidation<T>> {
    let n = linalg::ensure_square(matrix)?;
    let mut max_negative = T::zero();
    let mut max_column_deviation = T::zero();
    for c in 0..n {
        let col = matrix.column(c);
        for &x in col.iter() {
            if x < T::zero() {
                max_negative = max_negative.max(-x);
            }
        }
        max_column_deviation = max_column_deviation.max((col.sum() - T::one()).abs());
    }
    let pass = max_negative <= T::lit(tol.prob) && max_column_deviation <= T::lit(tol.stoch);
    Ok(KernelValidation {
        pass,
        max_negative,
        max_column_deviation,
    })
}

/// Column-stochastic transition kernel `Γ(to←from)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticKernel<T: Real> {
    matrix: RMatrix<T>,
    from_time: Option<T>,
    to_time: Option<T>,
}

impl<T: Real> StochasticKernel<T> {
    pub fn new(mut matrix: RMatrix<T>, tol: &Tolerances) -> Result<Self> {
        let report = validate_kernel(&matrix, tol)?;
        if !report.pass {
            return Err(report.into_error());
        }
        matrix.apply(|x| {
            if *x < T::zero() {
                *x = T::zero()
            }
        });
        Ok(Self {
            matrix,
            from_time: None,
            to_time: None,
        })
    }

    pub fn with_times(matrix: RMatrix<T>, from_time: T, to_time: T, tol: &Tolerances) -> Result<Self> {
        let mut kernel = Self::new(matrix, tol)?;
        if from_time == to_time {
            let n = kernel.dim();
            let deviation = linalg::max_abs(&(&kernel.matrix - RMatrix::<T>::identity(n, n)));
            if deviation > T::lit(tol.stoch) {
                return Err(Error::NonIdentityAtEqualTimes {
                    deviation: deviation.as_f64(),
                });
            }
        }
        kernel.from_time = Some(from_time);
        kernel.to_time = Some(to_time);
        Ok(kernel)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: RMatrix::identity(n, n),
            from_time: None,
            to_time: None,
        }
    }

    pub fn matrix(&self) -> &RMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> RMatrix<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn from_time(&self) -> Option<T> {
        self.from_time
    }

    pub fn to_time(&self) -> Option<T> {
        self.to_time
    }

    pub fn apply(&self, p: &ProbabilityVector<T>, tol: &Tolerances) -> Result<ProbabilityVector<T>> {
        linalg::ensure_dim(self.dim(), p.dim())?;
        ProbabilityVector::from_dvector(&self.matrix * p.entries(), tol)
    }
}

/// `Γ(t←s) = later · earlier`, the Chapman–Kolmogorov composition.
pub fn compose<T: Real>(
    later: &StochasticKernel<T>,
    earlier: &StochasticKernel<T>,
    tol: &Tolerances,
) -> Result<StochasticKernel<T>> {
    linalg::ensure_dim(later.dim(), earlier.dim())?;
    if let (Some(to), Some(from)) = (earlier.to_time, later.from_time) {
        let scale = T::one().max(to.abs()).max(from.abs());
        if (to - from).abs() > T::lit(1e-12) * scale {
            return Err(Error::TimeMismatch {
                earlier_to: to.as_f64(),
                later_from: from.as_f64(),
            });
        }
    }
    let n = later.dim();
    let relaxed = Tolerances {
        stoch: tol.stoch * n as f64,
        ..*tol
    };
    let mut out = StochasticKernel::new(&later.matrix * &earlier.matrix, &relaxed)?;
    out.from_time = earlier.from_time;
    out.to_time = later.to_time;
    Ok(out)
}

/// Continuous-time generator: nonnegative off-diagonal rates, zero column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix<T: Real> {
    matrix: RMatrix<T>,
}

impl<T: Real> RateMatrix<T> {
    pub fn new(mut matrix: RMatrix<T>, tol: &Tolerances) -> Result<Self> {
        let n = linalg::ensure_square(&matrix)?;
        let scale = T::one().max(linalg::max_abs(&matrix));
        let mut min_off = T::zero();
        let mut max_sum = T::zero();
        for c in 0..n {
            for r in 0..n {
                if r != c {
                    min_off = min_off.min(matrix[(r, c)]);
                }
            }
            max_sum = max_sum.max(matrix.column(c).sum().abs());
        }
        if -min_off > T::lit(tol.prob) * scale || max_sum > T::lit(tol.stoch) * scale {
            return Err(Error::InvalidRateMatrix {
                min_off_diagonal: min_off.as_f64(),
                max_column_sum: max_sum.as_f64(),
            });
        }
        for c in 0..n {
            for r in 0..n {
                if r != c && matrix[(r, c)] < T::zero() {
                    matrix[(r, c)] = T::zero();
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: RMatrix::zeros(n, n),
        }
    }

    pub fn matrix(&self) -> &RMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `exp(t R)`.
    pub fn propagator(&self, t: T) -> RMatrix<T> {
        linalg::expm_real(&(&self.matrix * t))
    }
}

type KernelFn<T> = dyn Fn(T, T) -> Result<RMatrix<T>> + Send + Sync;

/// Two-parameter family `{Γ(t←s)}` sampled on a time grid.
#[derive(Clone)]
pub struct KernelFamily<T: Real> {
    grid: Vec<T>,
    eval: Arc<KernelFn<T>>,
    tol: Tolerances,
}

impl<T: Real> fmt::Debug for KernelFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFamily")
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidGrid);
    }
    Ok(())
}

impl<T: Real> KernelFamily<T> {
    /// `eval(t, s)` returns the matrix of `Γ(t←s)`.
    pub fn new<F>(grid: Vec<T>, eval: F) -> Result<Self>
    where
        F: Fn(T, T) -> Result<RMatrix<T>> + Send + Sync + 'static,
    {
        check_grid(&grid)?;
        Ok(Self {
            grid,
            eval: Arc::new(eval),
            tol: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// Homogeneous Markov family `Γ(t←s) = exp((t−s) R)`.
    pub fn ctmc(grid: Vec<T>, rate: RateMatrix<T>) -> Result<Self> {
        Self::new(grid, move |t, s| Ok(rate.propagator(t - s)))
    }

    /// θ-process `Γ(t←s) = [exp(−iH(t−s))]_⊙`.
    pub fn theta_process(grid: Vec<T>, hamiltonian: CMatrix<T>) -> Result<Self> {
        linalg::ensure_square(&hamiltonian)?;
        Self::new(grid, move |t, s| {
            Ok(linalg::mod_square(&linalg::gates::evolution(&hamiltonian, t - s)))
        })
    }

    pub fn constant_identity(grid: Vec<T>, n: usize) -> Result<Self> {
        Self::new(grid, move |_, _| Ok(RMatrix::identity(n, n)))
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn matrix(&self, t: T, s: T) -> Result<RMatrix<T>> {
        (self.eval)(t, s)
    }

    /// Evaluates and validates `Γ(t←s)`.
    pub fn kernel(&self, t: T, s: T) -> Result<StochasticKernel<T>> {
        StochasticKernel::with_times(self.matrix(t, s)?, s, t, &self.tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CkTriple<T> {
    pub s: T,
    pub u: T,
    pub t: T,
    /// `‖Γ(t←s) − Γ(t←u)Γ(u←s)‖_max`
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CkFamilyReport<T> {
    pub triples: Vec<CkTriple<T>>,
    pub max_residual: T,
    pub pass: bool,
}

/// Chapman–Kolmogorov residual for every grid triple `s < u < t`.
pub fn check_ck_family<T: Real>(family: &KernelFamily<T>, tolerance: T) -> Result<CkFamilyReport<T>> {
    let grid = family.grid();
    if grid.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "CK check needs at least 3 grid times, got {}",
            grid.len()
        )));
    }
    let mut triples = Vec::new();
    let mut max_residual = T::zero();
    for (a, &s) in grid.iter().enumerate() {
        for (b, &u) in grid.iter().enumerate().skip(a + 1) {
            for &t in grid.iter().skip(b + 1) {
                let direct = family.kernel(t, s)?;
                let split = family.kernel(t, u)?.matrix() * family.kernel(u, s)?.matrix();
                let residual = linalg::max_abs(&(direct.matrix() - split));
                max_residual = max_residual.max(residual);
                triples.push(CkTriple { s, u, t, residual });
            }
        }
    }
    Ok(CkFamilyReport {
        triples,
        max_residual,
        pass: max_residual <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivisionRoute {
    /// `Γ̃ = Γ(t2←t0) Γ(t1←t0)⁻¹`
    Inverse,
    /// Phase-one simplex on `{Γ̃ ≥ 0, 1ᵀΓ̃ = 1ᵀ, Γ̃ Γ(t1←t0) = Γ(t2←t0)}`.
    LinearFeasibility,
    /// `Γ̃ = Dᵀ P S̃ D` read off a channel factor of the lifted process.
    QuantumWitness,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolatedConstraint<T> {
    NegativeEntry { row: usize, col: usize, value: T },
    ColumnSum { col: usize, deviation: T },
    /// Entry `(row, col)` of `Γ̃ Γ(t1←t0) = Γ(t2←t0)`; `slack` is the
    /// unresolved artificial mass for the feasibility route.
    Factorization { row: usize, col: usize, slack: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate<T> {
    pub route: DivisionRoute,
    pub violated: Vec<ViolatedConstraint<T>>,
    /// Largest violation (inverse route) or phase-one objective (simplex route).
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CDivisibility<T: Real> {
    Divisible {
        witness: StochasticKernel<T>,
        route: DivisionRoute,
        /// `‖Γ(t2←t0) − Γ̃ Γ(t1←t0)‖_max`
        residual: T,
    },
    Indivisible(InfeasibilityCertificate<T>),
}

impl<T: Real> CDivisibility<T> {
    pub fn is_divisible(&self) -> bool {
        matches!(self, CDivisibility::Divisible { .. })
    }

    pub fn witness(&self) -> Option<&StochasticKernel<T>> {
        match self {
            CDivisibility::Divisible { witness, .. } => Some(witness),
            CDivisibility::Indivisible(_) => None,
        }
    }
}

/// Decides whether `Γ(t2←t0) = Γ̃ Γ(t1←t0)` for some stochastic `Γ̃`.
pub fn c_divisibility_check<T: Real>(
    gamma_20: &StochasticKernel<T>,
    gamma_10: &StochasticKernel<T>,
    tolerance: T,
    tol: &Tolerances,
) -> Result<CDivisibility<T>> {
    linalg::ensure_dim(gamma_20.dim(), gamma_10.dim())?;
    let g10 = gamma_10.matrix();
    let g20 = gamma_20.matrix();
    let check_tol = Tolerances {
        prob: tolerance.as_f64(),
        stoch: tolerance.as_f64(),
        ..*tol
    };

    if linalg::condition_number_real(g10) < tol.condition_cap {
        let candidate = g20 * linalg::inverse_real(g10)?;
        let report = validate_kernel(&candidate, &check_tol)?;
        if report.pass {
            let witness = StochasticKernel::new(candidate, &check_tol)?;
            let residual = linalg::max_abs(&(g20 - witness.matrix() * g10));
            return Ok(CDivisibility::Divisible {
                witness,
                route: DivisionRoute::Inverse,
                residual,
            });
        }
        // the factorization is unique, so any violation is a certificate
        let n = candidate.nrows();
        let mut violated = Vec::new();
        for c in 0..n {
            for r in 0..n {
                if candidate[(r, c)] < -tolerance {
                    violated.push(ViolatedConstraint::NegativeEntry {
                        row: r,
                        col: c,
                        value: candidate[(r, c)],
                    });
                }
            }
            let deviation = candidate.column(c).sum() - T::one();
            if deviation.abs() > tolerance {
                violated.push(ViolatedConstraint::ColumnSum { col: c, deviation });
            }
        }
        return Ok(CDivisibility::Indivisible(InfeasibilityCertificate {
            route: DivisionRoute::Inverse,
            violated,
            residual: report.max_negative.max(report.max_column_deviation),
        }));
    }

    let n = g10.nrows();
    let var = |r: usize, c: usize| r * n + c;
    let mut lp = LinearProgram::<T>::new(n * n);
    for c in 0..n {
        let mut row = vec![T::zero(); n * n];
        for r in 0..n {
            row[var(r, c)] = T::one();
        }
        lp.add_equality(row, T::one());
    }
    for r in 0..n {
        for k in 0..n {
            let mut row = vec![T::zero(); n * n];
            for c in 0..n {
                row[var(r, c)] = g10[(c, k)];
            }
            lp.add_equality(row, g20[(r, k)]);
        }
    }
    match lp.feasible_point() {
        LpOutcome::Optimal { x, .. } => {
            let candidate = RMatrix::from_fn(n, n, |r, c| x[var(r, c)]);
            let witness = StochasticKernel::new(candidate, &check_tol)?;
            let residual = linalg::max_abs(&(g20 - witness.matrix() * g10));
            if residual > tolerance {
                return Err(Error::Numerical(format!(
                    "simplex witness misses the factorization by {:e}",
                    residual.as_f64()
                )));
            }
            Ok(CDivisibility::Divisible {
                witness,
                route: DivisionRoute::LinearFeasibility,
                residual,
            })
        }
        LpOutcome::Infeasible {
            infeasibility,
            violated_rows,
        } => {
            let violated = violated_rows
                .into_iter()
                .map(|i| {
                    if i < n {
                        ViolatedConstraint::ColumnSum {
                            col: i,
                            deviation: T::zero(),
                        }
                    } else {
                        let j = i - n;
                        ViolatedConstraint::Factorization {
                            row: j / n,
                            col: j % n,
                            slack: infeasibility,
                        }
                    }
                })
                .collect();
            Ok(CDivisibility::Indivisible(InfeasibilityCertificate {
                route: DivisionRoute::LinearFeasibility,
                violated,
                residual: infeasibility,
            }))
        }
        LpOutcome::Unbounded | LpOutcome::IterationLimit => {
            Err(Error::Numerical("feasibility simplex did not terminate".into()))
        }
    }
}

/// Ordinary least-squares slope of `log y` against `log x` over the points
/// with positive coordinates. `None` with fewer than three such points.
pub fn log_log_slope<T: Real>(points: &[(T, T)]) -> Option<T> {
    let logs: Vec<(T, T)> = points
        .iter()
        .filter(|(x, y)| *x > T::zero() && *y > T::zero())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 3 {
        return None;
    }
    let n = T::from_usize_lossy(logs.len());
    let mx = logs.iter().fold(T::zero(), |a, p| a + p.0) / n;
    let my = logs.iter().fold(T::zero(), |a, p| a + p.1) / n;
    let sxy = logs.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    let sxx = logs.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    slope.is_finite().then_some(slope)
}

/// First and second τ-derivatives of `Γ(τ←t)` at `τ = t` and the leakage
/// scan of the off-diagonal mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortTimeReport<T: Real> {
    pub r_estimate: RMatrix<T>,
    pub s_estimate: RMatrix<T>,
    pub step_used: T,
    /// `(h, Σ_{i≠j} Γ(t+h←t)_ij)` for every scanned step.
    pub leakage: Vec<(T, T)>,
    /// Log-log slope of leakage against `h`; present with ≥ 3 positive points.
    pub leakage_exponent: Option<T>,
}

pub fn short_time_derivatives<T: Real>(
    family: &KernelFamily<T>,
    t: T,
    steps: &[T],
) -> Result<ShortTimeReport<T>> {
    let mut steps: Vec<T> = steps.to_vec();
    if let Some(bad) = steps.iter().find(|h| !(**h > T::zero())) {
        return Err(Error::NonPositiveStep(bad.as_f64()));
    }
    steps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    steps.dedup();
    if steps.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "short-time scan needs at least 2 distinct steps, got {}",
            steps.len()
        )));
    }
    let h = steps[0];
    let f0 = family.kernel(t, t)?.into_matrix();
    let f1 = family.kernel(t + h, t)?.into_matrix();
    let f2 = family.kernel(t + h + h, t)?.into_matrix();
    let f3 = family.kernel(t + h + h + h, t)?.into_matrix();

    // second-order one-sided stencils; the family is only defined forward
    let r_estimate = (&f1 * T::lit(4.0) - &f0 * T::lit(3.0) - &f2) / (h + h);
    let s_estimate = (&f0 * T::lit(2.0) - &f1 * T::lit(5.0) + &f2 * T::lit(4.0) - &f3) / (h * h);

    let mut leakage = Vec::with_capacity(steps.len());
    for &step in &steps {
        let k = family.kernel(t + step, t)?;
        leakage.push((step, linalg::off_diagonal_mass_real(k.matrix())));
    }
    let leakage_exponent = log_log_slope(&leakage);
    Ok(ShortTimeReport {
        r_estimate,
        s_estimate,
        step_used: h,
        leakage,
        leakage_exponent,
    })
}

/// `p(t) = exp(tR) p0`.
pub fn ctmc_propagate<T: Real>(
    rate: &RateMatrix<T>,
    p0: &ProbabilityVector<T>,
    t: T,
    tol: &Tolerances,
) -> Result<ProbabilityVector<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.as_f64()));
    }
    linalg::ensure_dim(rate.dim(), p0.dim())?;
    let relaxed = Tolerances {
        prob: tol.prob.max(1e-12 * rate.dim() as f64),
        ..*tol
    };
    ProbabilityVector::from_dvector(rate.propagator(t) * p0.entries(), &relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow<T> {
    pub epsilon: T,
    pub n_steps: u64,
    /// `‖(Γ^(ε))^n − exp(tR)‖_max`
    pub error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable<T> {
    pub rows: Vec<ScalingRow<T>>,
    /// Errors never increase as ε decreases.
    pub monotone_decreasing: bool,
}

/// Number of micro-steps `⌊t / (ε² t*)⌋`, with quotients within 1e−9 of an
/// integer rounded to it so that representation error in `ε²` does not drop
/// a step.
pub fn micro_step_count<T: Real>(t: T, epsilon: T, t_star: T) -> u64 {
    let q = (t / (epsilon * epsilon * t_star)).as_f64();
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.abs().max(1.0) {
        r as u64
    } else {
        q.floor() as u64
    }
}

/// Accelerated DTMC→CTMC limit: `(I + ε² t* R)^⌊t/(ε² t*)⌋` against `exp(tR)`.
pub fn dtmc_to_ctmc_scaling<T: Real>(
    rate: &RateMatrix<T>,
    t_star: T,
    t: T,
    epsilons: &[T],
    tol: &Tolerances,
) -> Result<ScalingTable<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.as_f64()));
    }
    if !(t_star > T::zero()) {
        return Err(Error::InvalidArgument(format!("t* must be positive, got {}", t_star.as_f64())));
    }
    let n = rate.dim();
    let target = rate.propagator(t);
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        if !(epsilon > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                epsilon.as_f64()
            )));
        }
        let step = RMatrix::<T>::identity(n, n) + rate.matrix() * (epsilon * epsilon * t_star);
        if !validate_kernel(&step, tol)?.pass {
            return Err(Error::StepTooLarge {
                epsilon: epsilon.as_f64(),
            });
        }
        let n_steps = micro_step_count(t, epsilon, t_star);
        let power = u32::try_from(n_steps)
            .map_err(|_| Error::InvalidArgument(format!("{n_steps} micro-steps exceed u32")))?;
        let product = step.pow(power);
        rows.push(ScalingRow {
            epsilon,
            n_steps,
            error: linalg::max_abs(&(product - &target)),
        });
    }
    let mut by_eps = rows.clone();
    by_eps.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap());
    let monotone_decreasing = by_eps.windows(2).all(|w| w[1].error <= w[0].error);
    Ok(ScalingTable {
        rows,
        monotone_decreasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrivialityRow<T> {
    pub n: u32,
    pub step: T,
    /// `α(h) = max_j (1 − Γ(s+h←s)_jj)`
    pub alpha: T,
    /// `n α(h)`, a bound on the probability of leaving the initial state.
    pub bound: T,
    /// `‖Γ_h^n − I‖_max`
    pub product_distance: T,
}

/// Splits `[s, t]` into `n` equal steps of a θ-process and compares the
/// leave-probability bound `n α(h)` with the distance of the CK product
/// from the identity.
pub fn theta_markov_triviality_demo<T, F>(
    theta_step: F,
    t_minus_s: T,
    n_values: &[u32],
    tol: &Tolerances,
) -> Result<Vec<TrivialityRow<T>>>
where
    T: Real,
    F: Fn(T) -> CMatrix<T>,
{
    let theta0 = theta_step(T::zero());
    let n = linalg::ensure_square(&theta0)?;
    let deviation = linalg::max_abs_c(&(theta0 - linalg::identity_c::<T>(n)));
    if deviation > T::lit(tol.unitary) {
        return Err(Error::Precondition(format!(
            "θ(0) must be the identity (deviation {:e})",
            deviation.as_f64()
        )));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &count in n_values {
        if count == 0 {
            return Err(Error::InvalidArgument("number of sub-intervals must be positive".into()));
        }
        let h = t_minus_s / T::from_u32(count).unwrap();
        let gamma = linalg::mod_square(&theta_step(h));
        let report = validate_kernel(&gamma, tol)?;
        if !report.pass {
            return Err(report.into_error());
        }
        let alpha = (0..n).fold(T::zero(), |a, j| a.max(T::one() - gamma[(j, j)]));
        let product = gamma.pow(count);
        rows.push(TrivialityRow {
            n: count,
            step: h,
            alpha,
            bound: alpha * T::from_u32(count).unwrap(),
            product_distance: linalg::max_abs(&(product - DMatrix::<T>::identity(n, n))),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn k(rows: &[&[f64]]) -> StochasticKernel<f64> {
        let n = rows.len();
        StochasticKernel::new(RMatrix::from_fn(n, n, |r, c| rows[r][c]), &tol()).unwrap()
    }

    fn mix() -> StochasticKernel<f64> {
        k(&[&[0.5, 0.5], &[0.5, 0.5]])
    }

    fn flip() -> StochasticKernel<f64> {
        k(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn sym_rate() -> RateMatrix<f64> {
        RateMatrix::new(RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]), &tol()).unwrap()
    }

    #[test]
    fn validate_identity_and_mix() {
        let r = validate_kernel(&RMatrix::<f64>::identity(2, 2), &tol()).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_negative, 0.0);
        assert_eq!(r.max_column_deviation, 0.0);
        assert!(validate_kernel(mix().matrix(), &tol()).unwrap().pass);
    }

    #[test]
    fn validate_reports_negative_entry() {
        let m = RMatrix::from_row_slice(2, 2, &[1.2, 0.0, -0.2, 1.0]);
        let r = validate_kernel(&m, &tol()).unwrap();
        assert!(!r.pass);
        assert_abs_diff_eq!(r.max_negative, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn validate_rejects_non_square() {
        let m = RMatrix::<f64>::zeros(2, 3);
        assert_eq!(
            validate_kernel(&m, &tol()),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn probability_vector_clamps_round_off() {
        let p = ProbabilityVector::new(vec![1.0 + 1e-13, -1e-13], &tol()).unwrap();
        assert_eq!(p.entries()[1], 0.0);
        assert!(ProbabilityVector::new(vec![1.1, -0.1], &tol()).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.6], &tol()).is_err());
    }

    #[test]
    fn compose_examples() {
        let id = StochasticKernel::identity(2);
        assert_eq!(compose(&id, &mix(), &tol()).unwrap().matrix(), mix().matrix());
        assert_eq!(
            compose(&flip(), &flip(), &tol()).unwrap().matrix(),
            &RMatrix::identity(2, 2)
        );
        // Γ_mix Γ_flip: columns of Γ_mix permuted, still all ½
        assert_eq!(compose(&mix(), &flip(), &tol()).unwrap().matrix(), mix().matrix());
    }

    #[test]
    fn compose_checks_dimensions_and_times() {
        let three = StochasticKernel::<f64>::identity(3);
        assert!(matches!(
            compose(&three, &mix(), &tol()),
            Err(Error::DimensionMismatch { .. })
        ));
        let a = StochasticKernel::with_times(mix().into_matrix(), 0.0, 1.0, &tol()).unwrap();
        let b = StochasticKernel::with_times(mix().into_matrix(), 2.0, 3.0, &tol()).unwrap();
        assert!(matches!(compose(&b, &a, &tol()), Err(Error::TimeMismatch { .. })));
        let c = StochasticKernel::with_times(flip().into_matrix(), 1.0, 3.0, &tol()).unwrap();
        let ab = compose(&c, &a, &tol()).unwrap();
        assert_eq!(ab.from_time(), Some(0.0));
        assert_eq!(ab.to_time(), Some(3.0));
    }

    #[test]
    fn equal_times_require_identity() {
        assert!(matches!(
            StochasticKernel::with_times(mix().into_matrix(), 1.0, 1.0, &tol()),
            Err(Error::NonIdentityAtEqualTimes { .. })
        ));
    }

    #[test]
    fn ck_family_examples() {
        let grid = vec![0.0, 0.5, 1.0];
        let ctmc = KernelFamily::ctmc(grid.clone(), sym_rate()).unwrap();
        assert!(check_ck_family(&ctmc, 1e-12).unwrap().pass);
        let id = KernelFamily::constant_identity(grid.clone(), 2).unwrap();
        assert!(check_ck_family(&id, 0.0).unwrap().pass);
        let theta = KernelFamily::theta_process(grid, linalg::gates::pauli_x()).unwrap();
        let report = check_ck_family(&theta, 1e-6).unwrap();
        assert!(!report.pass);
        // brute force: sin²(1) vs 2 sin²(½) cos²(½)
        let s = 0.5f64.sin().powi(2);
        let expected = (1.0f64.sin().powi(2) - 2.0 * s * (1.0 - s)).abs();
        assert_abs_diff_eq!(report.max_residual, expected, epsilon = 1e-12);
    }

    #[test]
    fn ck_family_needs_three_times() {
        let fam = KernelFamily::<f64>::constant_identity(vec![0.0, 1.0], 2).unwrap();
        assert!(matches!(check_ck_family(&fam, 1e-9), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn grid_must_increase() {
        assert!(KernelFamily::<f64>::constant_identity(vec![0.0, 0.0], 2).is_err());
    }

    #[test]
    fn c_divisibility_examples() {
        let id = StochasticKernel::<f64>::identity(2);
        match c_divisibility_check(&id, &id, 1e-10, &tol()).unwrap() {
            CDivisibility::Divisible { witness, route, .. } => {
                assert_eq!(witness.matrix(), &RMatrix::identity(2, 2));
                assert_eq!(route, DivisionRoute::Inverse);
            }
            other => panic!("{other:?}"),
        }
        match c_divisibility_check(&flip(), &mix(), 1e-10, &tol()).unwrap() {
            CDivisibility::Indivisible(cert) => {
                assert_eq!(cert.route, DivisionRoute::LinearFeasibility);
                assert!(!cert.violated.is_empty());
                assert!(cert.residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
        let v = c_divisibility_check(&mix(), &flip(), 1e-10, &tol()).unwrap();
        assert_eq!(v.witness().unwrap().matrix(), mix().matrix());
    }

    #[test]
    fn c_divisibility_inverse_route_reports_negativity() {
        // Γ(t2←t0) = I but Γ(t1←t0) mixes: unique inverse has negative entries
        let g10 = k(&[&[0.8, 0.2], &[0.2, 0.8]]);
        let id = StochasticKernel::identity(2);
        match c_divisibility_check(&id, &g10, 1e-10, &tol()).unwrap() {
            CDivisibility::Indivisible(cert) => {
                assert_eq!(cert.route, DivisionRoute::Inverse);
                assert!(cert
                    .violated
                    .iter()
                    .any(|v| matches!(v, ViolatedConstraint::NegativeEntry { .. })));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn c_divisibility_singular_but_divisible() {
        // Γ(t1←t0) = Γ_mix, Γ(t2←t0) = any kernel with equal columns
        let g20 = k(&[&[0.3, 0.3], &[0.7, 0.7]]);
        let v = c_divisibility_check(&g20, &mix(), 1e-10, &tol()).unwrap();
        match v {
            CDivisibility::Divisible { route, residual, .. } => {
                assert_eq!(route, DivisionRoute::LinearFeasibility);
                assert!(residual < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_time_ctmc() {
        let fam = KernelFamily::ctmc(vec![0.0, 1.0], sym_rate()).unwrap();
        let report = short_time_derivatives(&fam, 0.0, &[1e-4, 1e-3, 1e-2]).unwrap();
        assert!(linalg::max_abs(&(&report.r_estimate - sym_rate().matrix())) < 1e-6);
        let r2 = sym_rate().matrix() * sym_rate().matrix();
        assert!(linalg::max_abs(&(&report.s_estimate - r2)) < 1e-5);
        assert_abs_diff_eq!(report.leakage_exponent.unwrap(), 1.0, epsilon = 0.05);
    }

    #[test]
    fn short_time_constant_family() {
        let fam = KernelFamily::<f64>::constant_identity(vec![0.0, 1.0], 3).unwrap();
        let report = short_time_derivatives(&fam, 0.0, &[1e-4, 1e-3, 1e-2]).unwrap();
        assert_eq!(linalg::max_abs(&report.r_estimate), 0.0);
        assert_eq!(linalg::max_abs(&report.s_estimate), 0.0);
        assert!(report.leakage.iter().all(|(_, m)| *m == 0.0));
        assert!(report.leakage_exponent.is_none());
    }

    #[test]
    fn short_time_theta_leakage_is_quadratic() {
        let fam = KernelFamily::theta_process(vec![0.0, 1.0], linalg::gates::pauli_x()).unwrap();
        let report = short_time_derivatives(&fam, 0.0, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert_abs_diff_eq!(report.leakage_exponent.unwrap(), 2.0, epsilon = 0.05);
        assert!(linalg::max_abs(&report.r_estimate) < 1e-6);
    }

    #[test]
    fn short_time_needs_two_steps() {
        let fam = KernelFamily::<f64>::constant_identity(vec![0.0, 1.0], 2).unwrap();
        assert!(matches!(
            short_time_derivatives(&fam, 0.0, &[1e-3]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn ctmc_propagate_examples() {
        let p0 = ProbabilityVector::basis(2, 0);
        let same = ctmc_propagate(&sym_rate(), &p0, 0.0, &tol()).unwrap();
        assert_eq!(same.entries(), p0.entries());
        let late = ctmc_propagate(&sym_rate(), &p0, 20.0, &tol()).unwrap();
        assert_abs_diff_eq!(late.entries()[0], 0.5, epsilon = 1e-8);
        // eigenvalues 0 and −2: p0(t) = ½(1 + e^{−2t})
        let half = ctmc_propagate(&sym_rate(), &p0, 0.5, &tol()).unwrap();
        let e = (-1.0f64).exp();
        assert_abs_diff_eq!(half.entries()[0], 0.5 * (1.0 + e), epsilon = 1e-14);
        assert_abs_diff_eq!(half.entries()[1], 0.5 * (1.0 - e), epsilon = 1e-14);
        assert!(matches!(
            ctmc_propagate(&sym_rate(), &p0, -1.0, &tol()),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn rate_matrix_validation() {
        let bad = RMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(matches!(
            RateMatrix::new(bad, &tol()),
            Err(Error::InvalidRateMatrix { .. })
        ));
    }

    #[test]
    fn scaling_trivial_cases() {
        let zero = RateMatrix::<f64>::zero(2);
        let table = dtmc_to_ctmc_scaling(&zero, 1.0, 1.0, &[0.1, 0.05], &tol()).unwrap();
        assert!(table.rows.iter().all(|r| r.error == 0.0));
        let table = dtmc_to_ctmc_scaling(&sym_rate(), 1.0, 0.0, &[0.1], &tol()).unwrap();
        assert_eq!(table.rows[0].n_steps, 0);
        assert_eq!(table.rows[0].error, 0.0);
    }

    #[test]
    fn scaling_error_ratio_is_about_four() {
        let table = dtmc_to_ctmc_scaling(&sym_rate(), 1.0, 1.0, &[0.1, 0.05], &tol()).unwrap();
        assert_eq!(table.rows[0].n_steps, 100);
        assert_eq!(table.rows[1].n_steps, 400);
        // oracle: eigenmode −2 gives |(1 − 2/m)^m − e^{−2}| / 2 in every entry
        for row in &table.rows {
            let m = row.n_steps as f64;
            let expected = ((1.0 - 2.0 / m).powf(m) - (-2.0f64).exp()).abs() / 2.0;
            assert_abs_diff_eq!(row.error, expected, epsilon = 1e-13);
        }
        let ratio = table.rows[0].error / table.rows[1].error;
        assert!((ratio / 4.0) < 1.5 && (4.0 / ratio) < 1.5, "ratio {ratio}");
        assert!(table.monotone_decreasing);
    }

    #[test]
    fn scaling_rejects_large_epsilon() {
        assert!(matches!(
            dtmc_to_ctmc_scaling(&sym_rate(), 1.0, 1.0, &[1.5], &tol()),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn micro_step_count_absorbs_representation_error() {
        assert_eq!(micro_step_count(1.0, 0.1, 1.0), 100);
        assert_eq!(micro_step_count(1.0, 0.3, 1.0), 11);
    }

    #[test]
    fn triviality_demo_identity() {
        let rows = theta_markov_triviality_demo(
            |_| linalg::identity_c::<f64>(2),
            1.0,
            &[10, 100],
            &tol(),
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.bound == 0.0 && r.product_distance == 0.0));
    }

    #[test]
    fn triviality_demo_pauli_x() {
        let x = linalg::gates::pauli_x::<f64>();
        let rows = theta_markov_triviality_demo(
            |h| linalg::gates::evolution(&x, h),
            1.0,
            &[10, 100, 1000],
            &tol(),
        )
        .unwrap();
        for r in &rows {
            let n = r.n as f64;
            assert_abs_diff_eq!(r.alpha, (1.0 / n).sin().powi(2), epsilon = 1e-14);
            // closed form of the power: off-diagonal (1 − cos(2h)^n)/2
            let expected = (1.0 - (2.0 / n).cos().powf(n)) / 2.0;
            assert_abs_diff_eq!(r.product_distance, expected, epsilon = 1e-12);
        }
        assert!(rows.windows(2).all(|w| w[1].bound < w[0].bound));
        assert!(rows.windows(2).all(|w| w[1].product_distance < w[0].product_distance));
    }

    #[test]
    fn triviality_demo_requires_identity_at_zero() {
        let x = linalg::gates::pauli_x::<f64>();
        assert!(matches!(
            theta_markov_triviality_demo(|_| x.clone(), 1.0, &[10], &tol()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x * x * x)).collect();
        assert_abs_diff_eq!(log_log_slope(&pts).unwrap(), 3.0, epsilon = 1e-12);
        assert!(log_log_slope(&pts[..2]).is_none());
    }
}
