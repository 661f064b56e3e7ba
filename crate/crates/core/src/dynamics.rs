//! GKSL generators, propagation, the CTMC embedding and the
//! Chapman–Kolmogorov checklist for superoperator families.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, ComplexField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, RateMatrix};
use crate::lifts::{canonical_lift, DensityOperator, KrausMap, LinearMap, SuperOperator};
use crate::linalg::{self, CMatrix};
use crate::scalar::Real;
use crate::tolerance::Tolerances;

pub const DEFAULT_FD_STEP: f64 = 1e-4;
pub const DEFAULT_CK_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_CK_GRID: [f64; 3] = [0.0, 0.4, 1.0];

/// `L(ρ) = −i[H, ρ] + Σ (L ρ L† − ½{L†L, ρ})`.
#[derive(Debug, Clone, PartialEq)]
pub struct GkslGenerator<T: Real> {
    hamiltonian: CMatrix<T>,
    jumps: Vec<CMatrix<T>>,
}

impl<T: Real> GkslGenerator<T> {
    pub fn new(hamiltonian: CMatrix<T>, jumps: Vec<CMatrix<T>>, tol: &Tolerances) -> Result<Self> {
        let n = linalg::ensure_square(&hamiltonian)?;
        let residual = linalg::hermiticity_residual(&hamiltonian);
        if residual > T::lit(tol.herm) {
            return Err(Error::NotHermitian {
                residual: residual.as_f64(),
            });
        }
        for l in &jumps {
            linalg::ensure_dim(n, linalg::ensure_square(l)?)?;
        }
        Ok(Self { hamiltonian, jumps })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            hamiltonian: CMatrix::zeros(n, n),
            jumps: Vec::new(),
        }
    }

    /// Pure Hamiltonian generator `−i[H, ·]`.
    pub fn hamiltonian_only(hamiltonian: CMatrix<T>, tol: &Tolerances) -> Result<Self> {
        Self::new(hamiltonian, Vec::new(), tol)
    }

    pub fn hamiltonian(&self) -> &CMatrix<T> {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[CMatrix<T>] {
        &self.jumps
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    fn anticommutator_part(&self) -> CMatrix<T> {
        let n = self.dim();
        let mut sum = CMatrix::zeros(n, n);
        for l in &self.jumps {
            sum += l.adjoint() * l;
        }
        sum
    }

    /// Direct evaluation of `L(ρ)`.
    pub fn apply(&self, rho: &CMatrix<T>) -> Result<CMatrix<T>> {
        linalg::ensure_dim(self.dim(), linalg::ensure_square(rho)?)?;
        let minus_i = Complex::new(T::zero(), -T::one());
        let half = Complex::new(T::lit(0.5), T::zero());
        let mut out = (&self.hamiltonian * rho - rho * &self.hamiltonian) * minus_i;
        let ldl = self.anticommutator_part();
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out -= (&ldl * rho + rho * &ldl) * half;
        Ok(out)
    }
}

/// Liouville matrix of the generator, column-stacking convention.
pub fn gksl_superoperator<T: Real>(gen: &GkslGenerator<T>) -> SuperOperator<T> {
    let n = gen.dim();
    let id = linalg::identity_c::<T>(n);
    let h = gen.hamiltonian();
    let minus_i = Complex::new(T::zero(), -T::one());
    let half = Complex::new(T::lit(0.5), T::zero());
    let mut s = (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * minus_i;
    for l in gen.jumps() {
        s += linalg::kron(&l.conjugate(), l);
    }
    let ldl = gen.anticommutator_part();
    s -= (linalg::kron(&id, &ldl) + linalg::kron(&ldl.transpose(), &id)) * half;
    SuperOperator::new(s).expect("n² x n² by construction")
}

/// `max_ab |Tr L(|a⟩⟨b|)|`, zero for any generator of a trace-preserving semigroup.
pub fn trace_annihilation_residual<T: Real>(generator: &SuperOperator<T>) -> T {
    let n = generator.dim();
    let m = generator.matrix();
    let mut worst = T::zero();
    for col in 0..n * n {
        let mut tr = Complex::new(T::zero(), T::zero());
        for k in 0..n {
            tr += m[(linalg::vec_index(n, k, k), col)];
        }
        worst = worst.max(tr.modulus());
    }
    worst
}

/// `K₀ = I − dt(iH + ½ Σ L†L)`, `K_μ = √dt L_μ`.
pub fn short_time_kraus<T: Real>(gen: &GkslGenerator<T>, dt: T, tol: &Tolerances) -> Result<KrausMap<T>> {
    if !(dt > T::zero()) {
        return Err(Error::NonPositiveStep(dt.as_f64()));
    }
    let n = gen.dim();
    let i = Complex::new(T::zero(), T::one());
    let half = Complex::new(T::lit(0.5), T::zero());
    let dtc = Complex::new(dt, T::zero());
    let k0 = linalg::identity_c::<T>(n) - (gen.hamiltonian() * i + gen.anticommutator_part() * half) * dtc;
    let sqrt_dt = Complex::new(dt.sqrt(), T::zero());
    let mut ops = vec![k0];
    ops.extend(gen.jumps().iter().map(|l| l * sqrt_dt));
    KrausMap::new(ops, tol)
}

/// Finite-time map `exp(t S_L)`.
pub fn channel<T: Real>(gen: &GkslGenerator<T>, t: T) -> Result<SuperOperator<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.as_f64()));
    }
    let s = gksl_superoperator(gen);
    SuperOperator::new(linalg::expm(&(s.matrix() * Complex::new(t, T::zero()))))
}

/// `ρ(t) = unvec(exp(t S_L) vec(ρ0))` for a time-independent generator.
pub fn propagate<T: Real>(
    gen: &GkslGenerator<T>,
    rho0: &DensityOperator<T>,
    t: T,
    tol: &Tolerances,
) -> Result<DensityOperator<T>> {
    let out = channel(gen, t)?.apply(rho0.matrix())?;
    DensityOperator::new(linalg::hermitian_part(&out), tol)
}

/// Piecewise-constant propagation over `grid`, holding the generator at its
/// midpoint value on each interval. Returns `ρ(grid.last)` from `ρ(grid[0]) = ρ0`.
pub fn propagate_piecewise<T, F>(
    grid: &[T],
    generator_at: F,
    rho0: &DensityOperator<T>,
    tol: &Tolerances,
) -> Result<DensityOperator<T>>
where
    T: Real,
    F: Fn(T) -> Result<GkslGenerator<T>>,
{
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidGrid);
    }
    let mut rho = rho0.matrix().clone();
    for w in grid.windows(2) {
        let gen = generator_at((w[0] + w[1]) * T::lit(0.5))?;
        rho = channel(&gen, w[1] - w[0])?.apply(&rho)?;
    }
    DensityOperator::new(linalg::hermitian_part(&rho), tol)
}

/// Jump operators `√R_ij |i⟩⟨j|` for `i ≠ j` and `R_ij > 0`, with a diagonal
/// Hamiltonian (zero when `diagonal_h` is `None`).
pub fn ctmc_embedding<T: Real>(rate: &RateMatrix<T>, diagonal_h: Option<&[T]>) -> Result<GkslGenerator<T>> {
    let n = rate.dim();
    let mut h = CMatrix::zeros(n, n);
    if let Some(diag) = diagonal_h {
        linalg::ensure_dim(n, diag.len())?;
        for (i, &x) in diag.iter().enumerate() {
            h[(i, i)] = Complex::new(x, T::zero());
        }
    }
    let r = rate.matrix();
    let mut jumps = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if i != j && r[(i, j)] > T::zero() {
                let mut l = CMatrix::zeros(n, n);
                l[(i, j)] = Complex::new(r[(i, j)].sqrt(), T::zero());
                jumps.push(l);
            }
        }
    }
    Ok(GkslGenerator { hamiltonian: h, jumps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPreservation<T> {
    /// Off-diagonal mass of `L(P̂ⁱ)` per basis projector.
    pub basis_residuals: Vec<T>,
    /// Off-diagonal mass of `L(diag(p))` for the random probes.
    pub sample_residuals: Vec<T>,
    pub max_residual: T,
    pub pass: bool,
}

/// Checks that `L` maps every basis projector to a diagonal operator.
/// `samples` additional random diagonal states (seeded) are probed as well.
pub fn diagonal_preservation_check<T: Real>(
    gen: &GkslGenerator<T>,
    samples: usize,
    tolerance: T,
    seed: u64,
) -> Result<DiagonalPreservation<T>> {
    let n = gen.dim();
    let basis_residuals = (0..n)
        .map(|i| Ok(linalg::off_diagonal_mass(&gen.apply(&linalg::basis_projector(n, i))?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample_residuals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let mut rho = CMatrix::zeros(n, n);
        for (i, x) in w.iter().enumerate() {
            rho[(i, i)] = Complex::new(T::lit(x / total), T::zero());
        }
        sample_residuals.push(linalg::off_diagonal_mass(&gen.apply(&rho)?));
    }
    let max_residual = basis_residuals
        .iter()
        .chain(&sample_residuals)
        .fold(T::zero(), |a, &b| a.max(b));
    Ok(DiagonalPreservation {
        basis_residuals,
        sample_residuals,
        max_residual,
        pass: max_residual <= tolerance,
    })
}

type SuperFn<T> = dyn Fn(T, T) -> Result<SuperOperator<T>> + Send + Sync;

/// Two-parameter family `{S_{t,s}}` on a time grid. The callable may be
/// evaluated off-grid and at `t < s`, which finite differences require.
#[derive(Clone)]
pub struct SuperOperatorFamily<T: Real> {
    grid: Vec<T>,
    dim: usize,
    eval: Arc<SuperFn<T>>,
}

impl<T: Real> fmt::Debug for SuperOperatorFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SuperOperatorFamily")
            .field("grid", &self.grid)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl<T: Real> SuperOperatorFamily<T> {
    pub fn new<F>(grid: Vec<T>, dim: usize, eval: F) -> Result<Self>
    where
        F: Fn(T, T) -> Result<SuperOperator<T>> + Send + Sync + 'static,
    {
        if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid);
        }
        Ok(Self {
            grid,
            dim,
            eval: Arc::new(eval),
        })
    }

    /// `S_{t,s} = exp((t−s) S_L)`.
    pub fn from_generator(grid: Vec<T>, gen: &GkslGenerator<T>) -> Result<Self> {
        let s = gksl_superoperator(gen);
        Self::new(grid, gen.dim(), move |t, s0| {
            SuperOperator::new(linalg::expm(&(s.matrix() * Complex::new(t - s0, T::zero()))))
        })
    }

    /// Conjugation by `exp(−iH(t−s))`.
    pub fn unitary(grid: Vec<T>, hamiltonian: CMatrix<T>) -> Result<Self> {
        let n = linalg::ensure_square(&hamiltonian)?;
        Self::new(grid, n, move |t, s| {
            SuperOperator::conjugation(&linalg::gates::evolution(&hamiltonian, t - s))
        })
    }

    /// Canonical lift of each `Γ(t←s)` taken independently.
    pub fn pairwise_lift(kernels: KernelFamily<T>, dim: usize) -> Result<Self> {
        let grid = kernels.grid().to_vec();
        let tol = Tolerances::default();
        Self::new(grid, dim, move |t, s| {
            let gamma = kernels.kernel(t, s)?;
            Ok(canonical_lift(&gamma, &tol).superoperator())
        })
    }

    pub fn constant_identity(grid: Vec<T>, n: usize) -> Result<Self> {
        Self::new(grid, n, move |_, _| Ok(SuperOperator::identity(n)))
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superop(&self, t: T, s: T) -> Result<SuperOperator<T>> {
        let out = (self.eval)(t, s).map_err(|e| match e {
            e @ Error::Evaluation { .. } => e,
            other => Error::Evaluation {
                t: t.as_f64(),
                s: s.as_f64(),
                reason: other.to_string(),
            },
        })?;
        if out.dim() != self.dim {
            return Err(Error::Evaluation {
                t: t.as_f64(),
                s: s.as_f64(),
                reason: format!("expected dimension {}, got {}", self.dim, out.dim()),
            });
        }
        Ok(out)
    }
}

fn central_difference<T: Real>(plus: &SuperOperator<T>, minus: &SuperOperator<T>, h: T) -> SuperOperator<T> {
    let scale = Complex::new(T::one() / (h + h), T::zero());
    SuperOperator::new((plus.matrix() - minus.matrix()) * scale).expect("same shape")
}

/// `L(t) ≈ (S_{t+h,t} − S_{t−h,t}) / 2h`.
pub fn generator_from_family<T: Real>(
    family: &SuperOperatorFamily<T>,
    t: T,
    fd_step: T,
) -> Result<SuperOperator<T>> {
    if !(fd_step > T::zero()) {
        return Err(Error::NonPositiveStep(fd_step.as_f64()));
    }
    let plus = family.superop(t + fd_step, t)?;
    let minus = family.superop(t - fd_step, t)?;
    Ok(central_difference(&plus, &minus, fd_step))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResidual<T> {
    pub t: T,
    pub s: T,
    /// `‖∂S_{t,s}/∂t − L(t) S_{t,s}‖_max`
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CkChecklist<T: Real> {
    /// `(s, ‖S_{s,s} − I‖_max)` per grid time.
    pub check_a: Vec<(T, T)>,
    /// Candidate generator `L(t)` per grid time.
    pub generators: Vec<(T, SuperOperator<T>)>,
    /// Forward-equation residuals for grid pairs `t ≥ s`.
    pub check_c: Vec<ForwardResidual<T>>,
    /// Richardson estimate of the central-difference error in `L(t)`:
    /// `max_t ‖L_h(t) − L_2h(t)‖_max / 3`.
    pub stencil_error: T,
    pub max_a: T,
    pub max_c: T,
    pub pass_a: bool,
    pub pass_c: bool,
    pub pass: bool,
}

/// Diagonal normalization, generator extraction and forward-equation checks.
/// `tolerance` must dominate the `O(fd_step²)` stencil error reported back.
pub fn ck_checklist<T: Real>(
    family: &SuperOperatorFamily<T>,
    fd_step: T,
    tolerance: T,
) -> Result<CkChecklist<T>> {
    let grid = family.grid();
    if grid.len() < 2 {
        return Err(Error::InsufficientData("the checklist needs at least two grid times".into()));
    }
    let identity = SuperOperator::<T>::identity(family.dim());

    let mut check_a = Vec::with_capacity(grid.len());
    for &s in grid {
        let diff = family.superop(s, s)?.matrix() - identity.matrix();
        check_a.push((s, linalg::max_abs_c(&diff)));
    }

    let mut generators = Vec::with_capacity(grid.len());
    let mut stencil_error = T::zero();
    for &t in grid {
        let l_h = generator_from_family(family, t, fd_step)?;
        let l_2h = generator_from_family(family, t, fd_step + fd_step)?;
        let est = linalg::max_abs_c(&(l_h.matrix() - l_2h.matrix())) / T::lit(3.0);
        stencil_error = stencil_error.max(est);
        generators.push((t, l_h));
    }

    let mut check_c = Vec::new();
    for (ti, &t) in grid.iter().enumerate() {
        let l_t = &generators[ti].1;
        for &s in &grid[..=ti] {
            let s_ts = family.superop(t, s)?;
            let deriv = central_difference(&family.superop(t + fd_step, s)?, &family.superop(t - fd_step, s)?, fd_step);
            let e = deriv.matrix() - l_t.matrix() * s_ts.matrix();
            check_c.push(ForwardResidual {
                t,
                s,
                residual: linalg::max_abs_c(&e),
            });
        }
    }

    let max_a = check_a.iter().fold(T::zero(), |a, &(_, r)| a.max(r));
    let max_c = check_c.iter().fold(T::zero(), |a, r| a.max(r.residual));
    let pass_a = max_a <= tolerance;
    let pass_c = max_c <= tolerance;
    Ok(CkChecklist {
        check_a,
        generators,
        check_c,
        stencil_error,
        max_a,
        max_c,
        pass_a,
        pass_c,
        pass: pass_a && pass_c,
    })
}
