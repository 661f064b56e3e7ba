//! Phase information as path-space memory: one-step indistinguishability,
//! two-step kernels, active-channel readout and parameter counting.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::StochasticKernel;
use crate::lifts::{dictionary_kernel, DensityOperator, KrausMap, LinearMap};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::scalar::Real;
use crate::simplex::{LinearProgram, LpOutcome};
use crate::tolerance::Tolerances;

pub use crate::linalg::mod_square;

fn ensure_unitary<T: Real>(u: &CMatrix<T>, tol: &Tolerances) -> Result<()> {
    linalg::ensure_square(u)?;
    let residual = linalg::unitarity_residual(u);
    if residual > T::lit(tol.unitary) {
        return Err(Error::NotUnitary {
            residual: residual.as_f64(),
        });
    }
    Ok(())
}

/// `[U_X]_⊙ = [U_Y]_⊙` within `tolerance`.
pub fn one_step_indistinguishable<T: Real>(
    u_x: &CMatrix<T>,
    u_y: &CMatrix<T>,
    tolerance: T,
    tol: &Tolerances,
) -> Result<bool> {
    ensure_unitary(u_x, tol)?;
    ensure_unitary(u_y, tol)?;
    linalg::ensure_dim(u_x.nrows(), u_y.nrows())?;
    Ok(linalg::max_abs(&(mod_square(u_x) - mod_square(u_y))) <= tolerance)
}

/// `[V U]_⊙`, which in general differs from `[V]_⊙ [U]_⊙`.
pub fn two_step_kernel<T: Real>(v: &CMatrix<T>, u: &CMatrix<T>, tol: &Tolerances) -> Result<RMatrix<T>> {
    ensure_unitary(v, tol)?;
    ensure_unitary(u, tol)?;
    linalg::ensure_dim(v.nrows(), u.nrows())?;
    Ok(mod_square(&(v * u)))
}

/// Column `x0` (0-based) of `[V U_X]_⊙ − [V U_Y]_⊙`.
pub fn two_step_difference<T: Real>(
    v: &CMatrix<T>,
    u_x: &CMatrix<T>,
    u_y: &CMatrix<T>,
    x0: usize,
    tolerance: T,
    tol: &Tolerances,
) -> Result<DVector<T>> {
    if !one_step_indistinguishable(u_x, u_y, tolerance, tol)? {
        return Err(Error::Precondition("U_X and U_Y are one-step distinguishable".into()));
    }
    let n = u_x.nrows();
    if x0 >= n {
        return Err(Error::InvalidArgument(format!("x0 = {x0} out of range for N = {n}")));
    }
    let diff = two_step_kernel(v, u_x, tol)? - two_step_kernel(v, u_y, tol)?;
    Ok(diff.column(x0).into_owned())
}

/// Positive effects summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmEffects<T: Real> {
    effects: Vec<CMatrix<T>>,
    completeness_residual: T,
}

impl<T: Real> PovmEffects<T> {
    pub fn new(effects: Vec<CMatrix<T>>, tol: &Tolerances) -> Result<Self> {
        let first = effects.first().ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
        let n = linalg::ensure_square(first)?;
        let mut sum = CMatrix::<T>::zeros(n, n);
        for (j, e) in effects.iter().enumerate() {
            linalg::ensure_dim(n, linalg::ensure_square(e)?)?;
            let herm = linalg::hermiticity_residual(e);
            if herm > T::lit(tol.herm) {
                return Err(Error::InvalidPovm(format!(
                    "effect {j} is not Hermitian (residual {:e})",
                    herm.as_f64()
                )));
            }
            let min = linalg::hermitian_eigenvalues(e)[0];
            if min < -T::lit(tol.psd) {
                return Err(Error::InvalidPovm(format!("effect {j} has eigenvalue {:e}", min.as_f64())));
            }
            sum += e;
        }
        let completeness_residual = linalg::max_abs_c(&(sum - linalg::identity_c::<T>(n)));
        if completeness_residual > T::lit(tol.tp) {
            return Err(Error::InvalidPovm(format!(
                "effects sum to the identity only within {:e}",
                completeness_residual.as_f64()
            )));
        }
        Ok(Self {
            effects,
            completeness_residual,
        })
    }

    pub fn effects(&self) -> &[CMatrix<T>] {
        &self.effects
    }

    /// `‖Σ E_j − I‖_max`
    pub fn completeness_residual(&self) -> T {
        self.completeness_residual
    }

    /// `p(j) = Tr(E_j ρ)`.
    pub fn probabilities(&self, rho: &DensityOperator<T>) -> Result<Vec<T>> {
        linalg::ensure_dim(self.effects[0].nrows(), rho.dim())?;
        Ok(self.effects.iter().map(|e| (e * rho.matrix()).trace().re).collect())
    }
}

/// `E_j = Σ Λ† P̂ʲ Λ`: projective readout preceded by the channel `Λ`.
pub fn povm_from_channel<T: Real>(lambda: &KrausMap<T>, tol: &Tolerances) -> Result<PovmEffects<T>> {
    if !lambda.is_trace_preserving() {
        return Err(Error::NotTracePreserving {
            residual: lambda.completeness_residual().as_f64(),
        });
    }
    let n = lambda.dim();
    let effects = (0..n)
        .map(|j| {
            let p = linalg::basis_projector::<T>(n, j);
            lambda
                .operators()
                .iter()
                .fold(CMatrix::zeros(n, n), |acc, k| acc + k.adjoint() * &p * k)
        })
        .collect();
    PovmEffects::new(effects, tol)
}

/// `Tr(P̂ʲ Λ(ρ))` by applying the channel and reading the diagonal.
pub fn channel_readout<T: Real>(lambda: &KrausMap<T>, rho: &DensityOperator<T>) -> Result<Vec<T>> {
    let out = lambda.apply(rho.matrix())?;
    Ok((0..out.nrows()).map(|j| out[(j, j)].re).collect())
}

/// `Γ' = Σ_{β,α} [Λ_β K_α]_⊙`.
pub fn modified_readout_kernel<T: Real>(
    lambda: &KrausMap<T>,
    evolution: &KrausMap<T>,
    tol: &Tolerances,
) -> Result<StochasticKernel<T>> {
    for map in [lambda, evolution] {
        if !map.is_trace_preserving() {
            return Err(Error::NotTracePreserving {
                residual: map.completeness_residual().as_f64(),
            });
        }
    }
    dictionary_kernel(&lambda.after(evolution, tol)?, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofCounts {
    /// `N^{m+1} − 1`
    pub path_law: u128,
    /// `m N²`
    pub unitary_lift: u128,
    /// `m (N⁴ − N²)`
    pub cptp_lift: u128,
}

pub fn dof_counts(n: u64, m: u32) -> Result<DofCounts> {
    if n < 2 || m < 1 {
        return Err(Error::InvalidArgument(format!(
            "need N >= 2 and m >= 1, got N = {n}, m = {m}"
        )));
    }
    let overflow = || Error::InvalidArgument(format!("counts overflow for N = {n}, m = {m}"));
    let n = u128::from(n);
    let m_wide = u128::from(m);
    let path_law = n.checked_pow(m + 1).ok_or_else(overflow)? - 1;
    let n2 = n.checked_mul(n).ok_or_else(overflow)?;
    let unitary_lift = m_wide.checked_mul(n2).ok_or_else(overflow)?;
    let n4 = n2.checked_mul(n2).ok_or_else(overflow)?;
    let cptp_lift = m_wide.checked_mul(n4 - n2).ok_or_else(overflow)?;
    Ok(DofCounts {
        path_law,
        unitary_lift,
        cptp_lift,
    })
}

/// Conditional `p(x₂ | x₁, x₀)` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTensor<T> {
    n: usize,
    data: Vec<T>,
}

fn tensor_index(n: usize, x2: usize, x1: usize, x0: usize) -> usize {
    x2 + n * (x1 + n * x0)
}

impl<T: Real> ConditionalTensor<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, x2: usize, x1: usize, x0: usize) -> T {
        self.data[tensor_index(self.n, x2, x1, x0)]
    }

    /// Transition matrix `x₁ → x₂` for a fixed start `x₀`.
    pub fn slice(&self, x0: usize) -> RMatrix<T> {
        RMatrix::from_fn(self.n, self.n, |x2, x1| self.get(x2, x1, x0))
    }

    /// `Σ_{x₁} p(x₂|x₁,x₀) Γ₁₀(x₁,x₀)`.
    pub fn marginalize(&self, gamma_10: &StochasticKernel<T>) -> Result<RMatrix<T>> {
        let n = self.n;
        linalg::ensure_dim(n, gamma_10.dim())?;
        let g = gamma_10.matrix();
        Ok(RMatrix::from_fn(n, n, |x2, x0| {
            (0..n).fold(T::zero(), |acc, x1| acc + self.get(x2, x1, x0) * g[(x1, x0)])
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeTimeFreedom<T> {
    pub feasible: bool,
    /// Dimension of the affine solution set of the equality constraints.
    pub affine_dimension: usize,
    /// Dimension of the feasible polytope (equalities plus `p ≥ 0`).
    pub solution_dimension: Option<usize>,
    /// Entries that vanish on every feasible conditional.
    pub forced_zeros: usize,
    /// A strictly positive feasible conditional exists.
    pub strictly_positive: bool,
    /// A point of the relative interior of the feasible polytope.
    pub sample_conditional: Option<ConditionalTensor<T>>,
}

/// Freedom left in `p(x₂|x₁,x₀)` by normalization and
/// `Σ_{x₁} p(x₂|x₁,x₀) Γ₁₀(x₁,x₀) = Γ₂₀(x₂,x₀)`.
pub fn three_time_freedom<T: Real>(
    gamma_10: &StochasticKernel<T>,
    gamma_20: &StochasticKernel<T>,
    tol: &Tolerances,
) -> Result<ThreeTimeFreedom<T>> {
    let n = gamma_10.dim();
    linalg::ensure_dim(n, gamma_20.dim())?;
    let n_vars = n * n * n;
    let g10 = gamma_10.matrix();
    let g20 = gamma_20.matrix();

    let mut rows: Vec<(Vec<T>, T)> = Vec::with_capacity(2 * n * n);
    for x0 in 0..n {
        for x1 in 0..n {
            let mut row = vec![T::zero(); n_vars];
            for x2 in 0..n {
                row[tensor_index(n, x2, x1, x0)] = T::one();
            }
            rows.push((row, T::one()));
        }
        for x2 in 0..n {
            let mut row = vec![T::zero(); n_vars];
            for x1 in 0..n {
                row[tensor_index(n, x2, x1, x0)] = g10[(x1, x0)];
            }
            rows.push((row, g20[(x2, x0)]));
        }
    }
    let a = RMatrix::from_fn(rows.len(), n_vars, |r, c| rows[r].0[c]);
    let affine_dimension = n_vars - linalg::numerical_rank_real(&a, 1e-10);

    let mut lp = LinearProgram::new(n_vars);
    for (row, rhs) in &rows {
        lp.add_equality(row.clone(), *rhs);
    }
    let first = match lp.feasible_point() {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible { .. } => {
            return Ok(ThreeTimeFreedom {
                feasible: false,
                affine_dimension,
                solution_dimension: None,
                forced_zeros: 0,
                strictly_positive: false,
                sample_conditional: None,
            })
        }
        LpOutcome::Unbounded | LpOutcome::IterationLimit => {
            return Err(Error::Numerical("feasibility simplex did not terminate".into()))
        }
    };

    // An entry is either positive on some vertex or zero on the whole polytope.
    let floor = T::lit(tol.stoch);
    let mut positive: Vec<bool> = first.iter().map(|&x| x > floor).collect();
    let mut witnesses = vec![first];
    let mut forced = vec![false; n_vars];
    for j in 0..n_vars {
        if positive[j] {
            continue;
        }
        let mut objective = vec![T::zero(); n_vars];
        objective[j] = T::one();
        match lp.maximize(&objective) {
            LpOutcome::Optimal { x, objective } if objective > floor => {
                for (p, &xk) in positive.iter_mut().zip(&x) {
                    *p = *p || xk > floor;
                }
                witnesses.push(x);
            }
            LpOutcome::Optimal { .. } => forced[j] = true,
            _ => return Err(Error::Numerical("entry maximization did not terminate".into())),
        }
    }
    let forced_zeros = forced.iter().filter(|&&f| f).count();
    let free: Vec<usize> = (0..n_vars).filter(|&j| !forced[j]).collect();
    let a_free = RMatrix::from_fn(rows.len(), free.len(), |r, c| a[(r, free[c])]);
    let solution_dimension = free.len() - linalg::numerical_rank_real(&a_free, 1e-10);

    let count = T::from_usize_lossy(witnesses.len());
    let data = (0..n_vars)
        .map(|j| {
            if forced[j] {
                T::zero()
            } else {
                witnesses.iter().fold(T::zero(), |acc, w| acc + w[j]) / count
            }
        })
        .collect();

    Ok(ThreeTimeFreedom {
        feasible: true,
        affine_dimension,
        solution_dimension: Some(solution_dimension),
        forced_zeros,
        strictly_positive: forced_zeros == 0,
        sample_conditional: Some(ConditionalTensor { n, data }),
    })
}
