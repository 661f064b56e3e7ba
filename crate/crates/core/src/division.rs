//! From quantum to classical divisibility: the diagonal-intermediate
//! criterion and division events driven by an uncorrelated environment.
//!
//! Composite spaces are ordered system ⊗ environment with the system index
//! varying slowest.

use crate::error::{Error, Result};
use crate::kernels::{c_divisibility_check, CDivisibility, DivisionRoute, ProbabilityVector, StochasticKernel};
use crate::lifts::{
    check_cptp, embed_diagonal, q_divisibility_check, superop_kernel_extract, CptpReport, LinearMap,
    QDivisibility, SuperOperator,
};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::scalar::Real;
use crate::tolerance::Tolerances;

pub const DEFAULT_RECORD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DivisionVerdict<T: Real> {
    pub q_divisibility: QDivisibility<T>,
    pub q_divisible: bool,
    /// Largest off-diagonal mass of `E(t1,t0)(P̂ⁱ)` over basis initializations.
    pub max_off_diagonal_mass: T,
    pub all_diagonal_at_t1: bool,
    pub gamma_10: StochasticKernel<T>,
    pub gamma_20: StochasticKernel<T>,
    /// Extracted from the quantum witness when both hypotheses hold, otherwise
    /// the independent classical test.
    pub c_divisibility: CDivisibility<T>,
    pub c_divisible: bool,
    pub theorem_applies: bool,
}

impl<T: Real> DivisionVerdict<T> {
    pub fn c_witness(&self) -> Option<&StochasticKernel<T>> {
        self.c_divisibility.witness()
    }
}

fn require_cptp<T: Real>(s: &SuperOperator<T>, tol: &Tolerances) -> Result<CptpReport<T>> {
    let report = check_cptp(s, tol);
    if !report.trace_preserving {
        return Err(Error::NotTracePreserving {
            residual: report.trace_residual.as_f64(),
        });
    }
    if !report.completely_positive {
        return Err(Error::NotCompletelyPositive {
            min_eigenvalue: report.min_choi_eigenvalue.as_f64(),
        });
    }
    Ok(report)
}

fn induced<T: Real>(s: &SuperOperator<T>, tol: &Tolerances) -> Result<StochasticKernel<T>> {
    let relaxed = Tolerances {
        prob: tol.prob.max(tol.tp),
        stoch: tol.stoch.max(tol.tp),
        ..*tol
    };
    StochasticKernel::new(superop_kernel_extract(s), &relaxed)
}

/// Q-divisibility at `t1` plus diagonal intermediate states implies
/// C-divisibility; the classical kernel is read off the quantum factor.
pub fn theorem1_check<T: Real>(
    e_10: &SuperOperator<T>,
    e_20: &SuperOperator<T>,
    tolerance: T,
    tol: &Tolerances,
) -> Result<DivisionVerdict<T>> {
    linalg::ensure_dim(e_10.dim(), e_20.dim())?;
    require_cptp(e_10, tol)?;
    require_cptp(e_20, tol)?;
    let n = e_10.dim();

    let q_divisibility = q_divisibility_check(e_20, e_10, tolerance, tol)?;
    let q_divisible = q_divisibility.is_divisible();

    let mut max_off_diagonal_mass = T::zero();
    for i in 0..n {
        let image = e_10.apply(&linalg::basis_projector(n, i))?;
        max_off_diagonal_mass = max_off_diagonal_mass.max(linalg::off_diagonal_mass(&image));
    }
    let all_diagonal_at_t1 = max_off_diagonal_mass <= tolerance;

    let gamma_10 = induced(e_10, tol)?;
    let gamma_20 = induced(e_20, tol)?;

    let mut theorem = None;
    if let (Some(witness), true) = (q_divisibility.witness(), all_diagonal_at_t1) {
        let extracted = superop_kernel_extract(witness);
        let residual = linalg::max_abs(&(gamma_20.matrix() - &extracted * gamma_10.matrix()));
        let relaxed = Tolerances {
            prob: tolerance.as_f64(),
            stoch: tolerance.as_f64(),
            ..*tol
        };
        if let (Ok(kernel), true) = (StochasticKernel::new(extracted, &relaxed), residual <= tolerance) {
            theorem = Some(CDivisibility::Divisible {
                witness: kernel,
                route: DivisionRoute::QuantumWitness,
                residual,
            });
        }
    }
    let theorem_applies = theorem.is_some();
    let c_divisibility = match theorem {
        Some(v) => v,
        None => c_divisibility_check(&gamma_20, &gamma_10, tolerance, tol)?,
    };
    let c_divisible = c_divisibility.is_divisible();

    Ok(DivisionVerdict {
        q_divisibility,
        q_divisible,
        max_off_diagonal_mass,
        all_diagonal_at_t1,
        gamma_10,
        gamma_20,
        c_divisibility,
        c_divisible,
        theorem_applies,
    })
}

/// `(A ⊗ B)(Y) = Σ_ij A(|i⟩⟨j|) ⊗ B(Y_ij)` with `Y_ij` the `(i, j)` block.
pub fn apply_product<T: Real>(a: &SuperOperator<T>, b: &SuperOperator<T>, y: &CMatrix<T>) -> Result<CMatrix<T>> {
    let (n_a, n_b) = (a.dim(), b.dim());
    linalg::ensure_dim(n_a * n_b, linalg::ensure_square(y)?)?;
    let mut out = CMatrix::zeros(n_a * n_b, n_a * n_b);
    for i in 0..n_a {
        for j in 0..n_a {
            let left = a.apply(&linalg::matrix_unit(n_a, i, j))?;
            let right = b.apply(&linalg::block(y, n_b, i, j))?;
            out += linalg::kron(&left, &right);
        }
    }
    Ok(out)
}

/// Record-form diagnostics for one system basis initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordCheck<T> {
    pub initial_state: usize,
    /// Mass between distinct system-basis blocks of `ρ_SE(t1)`.
    pub block_off_diagonal_mass: T,
    /// Off-diagonal mass of `Tr_E ρ_SE(t1)`.
    pub reduced_off_diagonal_mass: T,
    /// `|Tr ρ_SE(t1) − Tr Tr_E ρ_SE(t1)|`
    pub partial_trace_defect: T,
    pub reduced_min_eigenvalue: T,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentDivisionReport<T: Real> {
    pub record_checks: Vec<RecordCheck<T>>,
    pub record_form: bool,
    /// Reduced system maps over `[t0, t1]` and `[t0, t2]`.
    pub reduced_10: SuperOperator<T>,
    pub reduced_20: SuperOperator<T>,
    pub gamma_10: StochasticKernel<T>,
    pub gamma_20: StochasticKernel<T>,
    pub c_divisibility: CDivisibility<T>,
    pub c_divisible: bool,
    /// Kernel induced by the post-`t1` system map.
    pub post_system_kernel: RMatrix<T>,
    /// `‖Γ(t2←t0) − [post] Γ(t1←t0)‖_max`
    pub post_system_residual: T,
}

impl<T: Real> EnvironmentDivisionReport<T> {
    /// Record form failed at `t1`; the classical verdict is reported but the
    /// scenario hypotheses do not hold.
    pub fn scenario_violated(&self) -> bool {
        !self.record_form
    }

    pub fn gamma_tilde(&self) -> Option<&StochasticKernel<T>> {
        self.c_divisibility.witness()
    }
}

/// System starts in a configuration, the environment in `J(p_env)`; the joint
/// interaction runs over `[t0, t1]`, then `post_system ⊗ post_env` over `[t1, t2]`.
pub fn environment_division_scenario<T: Real>(
    p_env: &ProbabilityVector<T>,
    record_interaction: &SuperOperator<T>,
    post_system: &SuperOperator<T>,
    post_env: &SuperOperator<T>,
    tolerance: T,
    tol: &Tolerances,
) -> Result<EnvironmentDivisionReport<T>> {
    let n_s = post_system.dim();
    let n_e = post_env.dim();
    linalg::ensure_dim(n_e, p_env.dim())?;
    linalg::ensure_dim(n_s * n_e, record_interaction.dim())?;
    require_cptp(record_interaction, tol)?;
    require_cptp(post_system, tol)?;
    require_cptp(post_env, tol)?;

    let env0 = embed_diagonal(p_env).matrix().clone();
    let joint_t1 = |x: &CMatrix<T>| record_interaction.apply(&linalg::kron(x, &env0));

    let mut record_checks = Vec::with_capacity(n_s);
    for i in 0..n_s {
        let rho = joint_t1(&linalg::basis_projector(n_s, i))?;
        let reduced = linalg::partial_trace_second(&rho, n_s, n_e);
        let block_off_diagonal_mass = linalg::block_off_diagonal_mass(&rho, n_s, n_e);
        let reduced_off_diagonal_mass = linalg::off_diagonal_mass(&reduced);
        let partial_trace_defect = (rho.trace() - reduced.trace()).norm_sqr().sqrt();
        let reduced_min_eigenvalue = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&reduced))[0];
        if partial_trace_defect > T::lit(tol.tp) || reduced_min_eigenvalue < -T::lit(tol.psd) {
            return Err(Error::Numerical(format!(
                "partial trace lost trace or positivity for initial state {i}"
            )));
        }
        record_checks.push(RecordCheck {
            initial_state: i,
            block_off_diagonal_mass,
            reduced_off_diagonal_mass,
            partial_trace_defect,
            reduced_min_eigenvalue,
            pass: block_off_diagonal_mass <= tolerance && reduced_off_diagonal_mass <= tolerance,
        });
    }
    let record_form = record_checks.iter().all(|c| c.pass);

    let reduced_10 = SuperOperator::from_map(n_s, |x| {
        Ok(linalg::partial_trace_second(&joint_t1(x)?, n_s, n_e))
    })?;
    let reduced_20 = SuperOperator::from_map(n_s, |x| {
        let after = apply_product(post_system, post_env, &joint_t1(x)?)?;
        Ok(linalg::partial_trace_second(&after, n_s, n_e))
    })?;
    let gamma_10 = induced(&reduced_10, tol)?;
    let gamma_20 = induced(&reduced_20, tol)?;
    let c_divisibility = c_divisibility_check(&gamma_20, &gamma_10, tolerance, tol)?;
    let post_system_kernel = superop_kernel_extract(post_system);
    let post_system_residual = linalg::max_abs(&(gamma_20.matrix() - &post_system_kernel * gamma_10.matrix()));

    Ok(EnvironmentDivisionReport {
        record_checks,
        record_form,
        reduced_10,
        reduced_20,
        gamma_10,
        gamma_20,
        c_divisible: c_divisibility.is_divisible(),
        c_divisibility,
        post_system_kernel,
        post_system_residual,
    })
}

/// Conjugation by the controlled flip with the system as control.
pub fn controlled_flip<T: Real>() -> SuperOperator<T> {
    SuperOperator::conjugation(&linalg::gates::cnot()).expect("square")
}
