//! Operator side of the correspondence: density operators, Kraus,
//! left–right and superoperator representations of linear maps, the
//! kernel dictionary and the lift constructions.

use nalgebra::{Complex, ComplexField, DVector};

use crate::error::{Error, Result};
use crate::kernels::{validate_kernel, KernelValidation, ProbabilityVector, StochasticKernel};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::scalar::Real;
use crate::tolerance::Tolerances;

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> DensityOperator<T> {
    pub fn new(matrix: CMatrix<T>, tol: &Tolerances) -> Result<Self> {
        linalg::ensure_square(&matrix)?;
        let herm = linalg::hermiticity_residual(&matrix);
        if herm > T::lit(tol.herm) {
            return Err(Error::NotHermitian {
                residual: herm.as_f64(),
            });
        }
        let tr = matrix.trace();
        let trace_dev = (tr.re - T::one()).abs().max(tr.im.abs());
        if trace_dev > T::lit(tol.herm) {
            return Err(Error::InvalidDensity(format!(
                "trace deviates from 1 by {:e}",
                trace_dev.as_f64()
            )));
        }
        let min_eig = linalg::hermitian_eigenvalues(&matrix)
            .iter()
            .fold(T::max_value().unwrap(), |a, &b| a.min(b));
        if min_eig < -T::lit(tol.psd) {
            return Err(Error::InvalidDensity(format!(
                "minimum eigenvalue {:e}",
                min_eig.as_f64()
            )));
        }
        Ok(Self { matrix })
    }

    /// Basis projector `|i⟩⟨i|`.
    pub fn basis(n: usize, i: usize) -> Self {
        Self {
            matrix: linalg::basis_projector(n, i),
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn pure(state: &DVector<Complex<T>>, tol: &Tolerances) -> Result<Self> {
        Self::new(state * state.adjoint(), tol)
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn min_eigenvalue(&self) -> T {
        linalg::hermitian_eigenvalues(&self.matrix)
            .iter()
            .fold(T::max_value().unwrap(), |a, &b| a.min(b))
    }
}

/// A linear map on `n x n` operators.
pub trait LinearMap<T: Real> {
    fn dim(&self) -> usize;

    fn apply(&self, x: &CMatrix<T>) -> Result<CMatrix<T>>;

    /// Liouville matrix acting on column-stacked operators.
    fn superoperator(&self) -> SuperOperator<T>;

    /// Maximum deviation from trace preservation, `max_ab |Tr φ(|a⟩⟨b|) − δ_ab|`
    /// or an equivalent representation-specific residual.
    fn trace_residual(&self) -> T;
}

fn check_operand<T: Real>(dim: usize, x: &CMatrix<T>) -> Result<()> {
    let n = linalg::ensure_square(x)?;
    linalg::ensure_dim(dim, n)
}

/// Operator-sum map `ρ ↦ Σ K ρ K†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausMap<T: Real> {
    operators: Vec<CMatrix<T>>,
    dim: usize,
    completeness_residual: T,
    trace_preserving: bool,
}

impl<T: Real> KrausMap<T> {
    /// Operators with Frobenius norm below `tol.kraus_drop` are dropped.
    pub fn new(operators: Vec<CMatrix<T>>, tol: &Tolerances) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidArgument("a Kraus map needs at least one operator".into()))?;
        let dim = linalg::ensure_square(first)?;
        for op in &operators {
            check_operand(dim, op)?;
        }
        let drop = T::lit(tol.kraus_drop);
        let operators: Vec<CMatrix<T>> = operators.into_iter().filter(|k| k.norm() >= drop).collect();
        let mut sum = CMatrix::<T>::zeros(dim, dim);
        for k in &operators {
            sum += k.adjoint() * k;
        }
        let completeness_residual = linalg::max_abs_c(&(sum - linalg::identity_c::<T>(dim)));
        Ok(Self {
            operators,
            dim,
            completeness_residual,
            trace_preserving: completeness_residual <= T::lit(tol.tp),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![linalg::identity_c(n)], &Tolerances::default()).expect("identity")
    }

    pub fn unitary(u: CMatrix<T>, tol: &Tolerances) -> Result<Self> {
        Self::new(vec![u], tol)
    }

    pub fn operators(&self) -> &[CMatrix<T>] {
        &self.operators
    }

    /// Number of retained Kraus operators.
    pub fn rank(&self) -> usize {
        self.operators.len()
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `‖Σ K†K − I‖_max`
    pub fn completeness_residual(&self) -> T {
        self.completeness_residual
    }

    /// Kraus set of `self ∘ earlier`.
    pub fn after(&self, earlier: &KrausMap<T>, tol: &Tolerances) -> Result<Self> {
        linalg::ensure_dim(self.dim, earlier.dim)?;
        let mut ops = Vec::with_capacity(self.rank() * earlier.rank());
        for a in &self.operators {
            for b in &earlier.operators {
                ops.push(a * b);
            }
        }
        if ops.is_empty() {
            ops.push(CMatrix::zeros(self.dim, self.dim));
        }
        Self::new(ops, tol)
    }
}

impl<T: Real> LinearMap<T> for KrausMap<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &CMatrix<T>) -> Result<CMatrix<T>> {
        check_operand(self.dim, x)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.operators {
            out += k * x * k.adjoint();
        }
        Ok(out)
    }

    fn superoperator(&self) -> SuperOperator<T> {
        let n2 = self.dim * self.dim;
        let mut s = CMatrix::zeros(n2, n2);
        for k in &self.operators {
            s += linalg::kron(&k.conjugate(), k);
        }
        SuperOperator { matrix: s, dim: self.dim }
    }

    fn trace_residual(&self) -> T {
        self.completeness_residual
    }
}

/// Left–right operator-sum map `X ↦ Σ A X B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftRightMap<T: Real> {
    left: Vec<CMatrix<T>>,
    right: Vec<CMatrix<T>>,
    dim: usize,
}

impl<T: Real> LeftRightMap<T> {
    pub fn new(left: Vec<CMatrix<T>>, right: Vec<CMatrix<T>>) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch {
                expected: left.len(),
                found: right.len(),
            });
        }
        let first = left
            .first()
            .ok_or_else(|| Error::InvalidArgument("a left-right map needs at least one term".into()))?;
        let dim = linalg::ensure_square(first)?;
        for op in left.iter().chain(&right) {
            check_operand(dim, op)?;
        }
        Ok(Self { left, right, dim })
    }

    pub fn left_ops(&self) -> &[CMatrix<T>] {
        &self.left
    }

    pub fn right_ops(&self) -> &[CMatrix<T>] {
        &self.right
    }
}

impl<T: Real> LinearMap<T> for LeftRightMap<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &CMatrix<T>) -> Result<CMatrix<T>> {
        check_operand(self.dim, x)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (a, b) in self.left.iter().zip(&self.right) {
            out += a * x * b;
        }
        Ok(out)
    }

    fn superoperator(&self) -> SuperOperator<T> {
        let n2 = self.dim * self.dim;
        let mut s = CMatrix::zeros(n2, n2);
        for (a, b) in self.left.iter().zip(&self.right) {
            s += linalg::kron(&b.transpose(), a);
        }
        SuperOperator { matrix: s, dim: self.dim }
    }

    /// `‖Σ B A − I‖_max`
    fn trace_residual(&self) -> T {
        let mut sum = CMatrix::<T>::zeros(self.dim, self.dim);
        for (a, b) in self.left.iter().zip(&self.right) {
            sum += b * a;
        }
        linalg::max_abs_c(&(sum - linalg::identity_c::<T>(self.dim)))
    }
}

/// Liouville matrix `S` with `vec(φ(X)) = S vec(X)` (column stacking).
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator<T: Real> {
    matrix: CMatrix<T>,
    dim: usize,
}

impl<T: Real> SuperOperator<T> {
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        let n2 = linalg::ensure_square(&matrix)?;
        let dim = (n2 as f64).sqrt().round() as usize;
        if dim * dim != n2 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "superoperator size {n2} is not a nonzero perfect square"
            )));
        }
        Ok(Self { matrix, dim })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: CMatrix::identity(n * n, n * n),
            dim: n,
        }
    }

    /// Dephasing projector `P` in the configuration basis.
    pub fn dephasing(n: usize) -> Self {
        Self {
            matrix: linalg::to_complex(&dephasing_projector::<T>(n)),
            dim: n,
        }
    }

    /// Conjugation `ρ ↦ U ρ U†`.
    pub fn conjugation(u: &CMatrix<T>) -> Result<Self> {
        let n = linalg::ensure_square(u)?;
        Ok(Self {
            matrix: linalg::kron(&u.conjugate(), u),
            dim: n,
        })
    }

    /// Builds the Liouville matrix of any map from its action on matrix units.
    pub fn from_map<F>(n: usize, map: F) -> Result<Self>
    where
        F: Fn(&CMatrix<T>) -> Result<CMatrix<T>>,
    {
        let n2 = n * n;
        let mut s = CMatrix::zeros(n2, n2);
        for j in 0..n {
            for i in 0..n {
                let image = map(&linalg::matrix_unit(n, i, j))?;
                check_operand(n, &image)?;
                s.set_column(linalg::vec_index(n, i, j), &linalg::vectorize(&image));
            }
        }
        Ok(Self { matrix: s, dim: n })
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// `self ∘ earlier`
    pub fn after(&self, earlier: &SuperOperator<T>) -> Result<Self> {
        linalg::ensure_dim(self.dim, earlier.dim)?;
        Ok(Self {
            matrix: &self.matrix * &earlier.matrix,
            dim: self.dim,
        })
    }

    pub fn choi(&self) -> ChoiMatrix<T> {
        ChoiMatrix::from_superoperator(self)
    }
}

impl<T: Real> LinearMap<T> for SuperOperator<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &CMatrix<T>) -> Result<CMatrix<T>> {
        check_operand(self.dim, x)?;
        Ok(linalg::unvectorize(&(&self.matrix * linalg::vectorize(x)), self.dim))
    }

    fn superoperator(&self) -> SuperOperator<T> {
        self.clone()
    }

    fn trace_residual(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for b in 0..n {
            for a in 0..n {
                let col = linalg::vec_index(n, a, b);
                let mut tr = Complex::new(T::zero(), T::zero());
                for k in 0..n {
                    tr += self.matrix[(linalg::vec_index(n, k, k), col)];
                }
                if a == b {
                    tr -= Complex::new(T::one(), T::zero());
                }
                worst = worst.max(tr.modulus());
            }
        }
        worst
    }
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ φ(|i⟩⟨j|)` and its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix<T: Real> {
    matrix: CMatrix<T>,
    eigenvalues: DVector<T>,
}

impl<T: Real> ChoiMatrix<T> {
    pub fn from_superoperator(s: &SuperOperator<T>) -> Self {
        let n = s.dim;
        let matrix = CMatrix::from_fn(n * n, n * n, |row, col| {
            let (i, a) = (row / n, row % n);
            let (j, b) = (col / n, col % n);
            s.matrix[(linalg::vec_index(n, a, b), linalg::vec_index(n, i, j))]
        });
        let eigenvalues = linalg::hermitian_eigenvalues(&matrix);
        Self { matrix, eigenvalues }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn hermiticity_residual(&self) -> T {
        linalg::hermiticity_residual(&self.matrix)
    }

    /// Scale-aware PSD floor `tol.psd · max(1, max |λ|)`.
    pub fn psd_tolerance(&self, tol: &Tolerances) -> T {
        let scale = self.eigenvalues.iter().fold(T::one(), |a, &b| a.max(b.abs()));
        T::lit(tol.psd) * scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport<T> {
    pub trace_preserving: bool,
    pub trace_residual: T,
    pub completely_positive: bool,
    pub min_choi_eigenvalue: T,
    pub choi_tolerance: T,
}

impl<T> CptpReport<T> {
    pub fn is_cptp(&self) -> bool {
        self.trace_preserving && self.completely_positive
    }
}

pub fn check_cptp<T: Real, M: LinearMap<T> + ?Sized>(map: &M, tol: &Tolerances) -> CptpReport<T> {
    let trace_residual = map.trace_residual();
    let choi = map.superoperator().choi();
    let choi_tolerance = choi.psd_tolerance(tol);
    let min_choi_eigenvalue = choi.min_eigenvalue();
    CptpReport {
        trace_preserving: trace_residual <= T::lit(tol.tp),
        trace_residual,
        completely_positive: min_choi_eigenvalue >= -choi_tolerance
            && choi.hermiticity_residual() <= T::lit(tol.herm) * T::one().max(linalg::max_abs_c(choi.matrix())),
        min_choi_eigenvalue,
        choi_tolerance,
    }
}

/// `J(p) = diag(p)`.
pub fn embed_diagonal<T: Real>(p: &ProbabilityVector<T>) -> DensityOperator<T> {
    let n = p.dim();
    let mut m = CMatrix::zeros(n, n);
    for (i, &x) in p.entries().iter().enumerate() {
        m[(i, i)] = Complex::new(x, T::zero());
    }
    DensityOperator { matrix: m }
}

fn dephase_matrix<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let n = m.nrows();
    CMatrix::from_fn(n, n, |r, c| if r == c { m[(r, c)] } else { Complex::new(T::zero(), T::zero()) })
}

/// `Π(ρ) = Σ P̂ʲ ρ P̂ʲ`.
pub fn dephase<T: Real>(rho: &DensityOperator<T>) -> DensityOperator<T> {
    DensityOperator {
        matrix: dephase_matrix(&rho.matrix),
    }
}

/// Diagonal of `ρ` as a probability vector. With `require_diagonal` the
/// off-diagonal mass must be within `tol.herm`; otherwise `ρ` is dephased first.
pub fn readout<T: Real>(
    rho: &DensityOperator<T>,
    require_diagonal: bool,
    tol: &Tolerances,
) -> Result<ProbabilityVector<T>> {
    if require_diagonal {
        let mass = linalg::off_diagonal_mass(&rho.matrix);
        if mass > T::lit(tol.herm) {
            return Err(Error::NotDiagonal { mass: mass.as_f64() });
        }
    }
    let relaxed = Tolerances {
        prob: tol.prob.max(tol.herm),
        ..*tol
    };
    ProbabilityVector::from_dvector(rho.matrix.diagonal().map(|z| z.re), &relaxed)
}

/// `φ(ρ) = Σ K ρ K†` for a trace-preserving map.
pub fn apply_kraus<T: Real>(
    map: &KrausMap<T>,
    rho: &DensityOperator<T>,
    tol: &Tolerances,
) -> Result<DensityOperator<T>> {
    let out = map.apply(&rho.matrix)?;
    if !map.is_trace_preserving() {
        let tr = out.trace();
        if (tr.re - T::one()).abs() > T::lit(tol.herm) {
            return Err(Error::NotTracePreserving {
                residual: map.completeness_residual().as_f64(),
            });
        }
    }
    DensityOperator::new(out, tol)
}

/// Kernel read off the diagonal: `Γ_ji = Tr(P̂ʲ φ(P̂ⁱ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedKernel<T: Real> {
    pub matrix: RMatrix<T>,
    pub validation: KernelValidation<T>,
    /// Largest imaginary part met on the diagonals (non-Hermitian maps).
    pub max_imaginary: T,
    /// Trace-preservation residual of the map (`Σ B A = I` for left–right maps).
    pub trace_residual: T,
}

impl<T: Real> InducedKernel<T> {
    pub fn into_kernel(self, tol: &Tolerances) -> Result<StochasticKernel<T>> {
        StochasticKernel::new(self.matrix, tol)
    }
}

pub fn induced_kernel<T: Real, M: LinearMap<T> + ?Sized>(map: &M, tol: &Tolerances) -> Result<InducedKernel<T>> {
    let n = map.dim();
    let mut matrix = RMatrix::zeros(n, n);
    let mut max_imaginary = T::zero();
    for i in 0..n {
        let image = map.apply(&linalg::basis_projector(n, i))?;
        for j in 0..n {
            matrix[(j, i)] = image[(j, j)].re;
            max_imaginary = max_imaginary.max(image[(j, j)].im.abs());
        }
    }
    let validation = validate_kernel(&matrix, tol)?;
    Ok(InducedKernel {
        matrix,
        validation,
        max_imaginary,
        trace_residual: map.trace_residual(),
    })
}

/// `Γ = Σ K ⊙ K*` for a trace-preserving Kraus map.
pub fn dictionary_kernel<T: Real>(map: &KrausMap<T>, tol: &Tolerances) -> Result<StochasticKernel<T>> {
    if !map.is_trace_preserving() {
        return Err(Error::NotTracePreserving {
            residual: map.completeness_residual().as_f64(),
        });
    }
    let n = map.dim();
    let mut gamma = RMatrix::zeros(n, n);
    for k in map.operators() {
        gamma += linalg::mod_square(k);
    }
    StochasticKernel::new(gamma, tol)
}

/// Rank-one Kraus operators `√Γ_ji |j⟩⟨i|`; zero-weight operators are dropped.
pub fn canonical_lift<T: Real>(gamma: &StochasticKernel<T>, tol: &Tolerances) -> KrausMap<T> {
    let n = gamma.dim();
    let mut ops = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let w = gamma.matrix()[(j, i)];
            if w > T::zero() {
                let mut k = CMatrix::zeros(n, n);
                k[(j, i)] = Complex::new(w.sqrt(), T::zero());
                ops.push(k);
            }
        }
    }
    if ops.is_empty() {
        ops.push(CMatrix::zeros(n, n));
    }
    KrausMap::new(ops, tol).expect("operators share the kernel dimension")
}

/// Single-term conjugation `ρ ↦ θ ρ θ†` and its induced kernel `[θ]_⊙`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaLift<T: Real> {
    pub map: LeftRightMap<T>,
    /// Holds iff θ is unitary.
    pub trace_preserving: bool,
    pub unitarity_residual: T,
    pub kernel: RMatrix<T>,
    pub kernel_validation: KernelValidation<T>,
}

pub fn theta_conjugation_lift<T: Real>(theta: &CMatrix<T>, tol: &Tolerances) -> Result<ThetaLift<T>> {
    linalg::ensure_square(theta)?;
    let unitarity_residual = linalg::unitarity_residual(theta);
    let kernel = linalg::mod_square(theta);
    let kernel_validation = validate_kernel(&kernel, tol)?;
    Ok(ThetaLift {
        map: LeftRightMap::new(vec![theta.clone()], vec![theta.adjoint()])?,
        trace_preserving: unitarity_residual <= T::lit(tol.unitary),
        unitarity_residual,
        kernel,
        kernel_validation,
    })
}

/// Column selectors `K_β = θ P̂^β`, CPTP whenever `[θ]_⊙` is stochastic.
pub fn barandes_column_lift<T: Real>(theta: &CMatrix<T>, tol: &Tolerances) -> Result<KrausMap<T>> {
    let n = linalg::ensure_square(theta)?;
    let report = validate_kernel(&linalg::mod_square(theta), tol)?;
    if !report.pass {
        return Err(Error::NotStochastic {
            max_negative: report.max_negative.as_f64(),
            max_column_deviation: report.max_column_deviation.as_f64(),
        });
    }
    let ops = (0..n).map(|b| theta * linalg::basis_projector::<T>(n, b)).collect();
    KrausMap::new(ops, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probes<T: Real> {
    /// The `N` point masses; sufficient by linearity.
    Basis,
    Vectors(Vec<ProbabilityVector<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport<T> {
    /// `‖diag(Π φ(J(p))) − Γ p‖_max` per probe.
    pub residuals: Vec<T>,
    pub max_residual: T,
    pub pass: bool,
}

/// Checks `Π(φ(J(p))) = J(Γ p)` on the given probes.
pub fn compatibility_check<T: Real, M: LinearMap<T> + ?Sized>(
    map: &M,
    gamma: &StochasticKernel<T>,
    probes: &Probes<T>,
    tolerance: T,
) -> Result<CompatibilityReport<T>> {
    let n = map.dim();
    linalg::ensure_dim(n, gamma.dim())?;
    let probes: Vec<ProbabilityVector<T>> = match probes {
        Probes::Basis => (0..n).map(|i| ProbabilityVector::basis(n, i)).collect(),
        Probes::Vectors(v) => v.clone(),
    };
    let mut residuals = Vec::with_capacity(probes.len());
    for p in &probes {
        linalg::ensure_dim(n, p.dim())?;
        let image = map.apply(embed_diagonal(p).matrix())?;
        let target = gamma.matrix() * p.entries();
        let residual = (0..n).fold(T::zero(), |acc, j| {
            let z = image[(j, j)] - Complex::new(target[j], T::zero());
            acc.max(z.modulus())
        });
        residuals.push(residual);
    }
    let max_residual = residuals.iter().fold(T::zero(), |a, &b| a.max(b));
    Ok(CompatibilityReport {
        residuals,
        max_residual,
        pass: max_residual <= tolerance,
    })
}

pub fn to_superoperator<T: Real, M: LinearMap<T> + ?Sized>(map: &M) -> SuperOperator<T> {
    map.superoperator()
}

/// Injection `D` with `vec(J(p)) = D p`: `D_{k(i), i} = 1` for the
/// column-stacked diagonal slot `k(i)`.
pub fn injection_matrix<T: Real>(n: usize) -> RMatrix<T> {
    let mut d = RMatrix::zeros(n * n, n);
    for i in 0..n {
        d[(linalg::vec_index(n, i, i), i)] = T::one();
    }
    d
}

/// Projector `P` with `vec(Π(ρ)) = P vec(ρ)`.
pub fn dephasing_projector<T: Real>(n: usize) -> RMatrix<T> {
    let mut p = RMatrix::zeros(n * n, n * n);
    for i in 0..n {
        let k = linalg::vec_index(n, i, i);
        p[(k, k)] = T::one();
    }
    p
}

/// `Γ = Dᵀ P S D` (real part).
pub fn superop_kernel_extract<T: Real>(s: &SuperOperator<T>) -> RMatrix<T> {
    let n = s.dim;
    let d = linalg::to_complex(&injection_matrix::<T>(n));
    let p = linalg::to_complex(&dephasing_projector::<T>(n));
    linalg::real_part(&(d.transpose() * p * s.matrix() * d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QRoute {
    Inverse,
    PseudoInverse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QObstruction<T> {
    /// `rank E(t1,t0) < rank E(t2,t0)`: no map can factor through.
    RankDeficit { rank_10: usize, rank_20: usize },
    /// `S̃ E(t1,t0) ≠ E(t2,t0)` for the least-squares candidate.
    RangeMismatch { residual: T },
    /// The factor is unique and fails the CPTP test.
    UniqueFactorNotCptp { cptp: CptpReport<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum QDivisibility<T: Real> {
    Divisible {
        witness: SuperOperator<T>,
        cptp: CptpReport<T>,
        route: QRoute,
    },
    Indivisible(QObstruction<T>),
    /// A linear factor exists but the pseudo-inverse candidate is not CPTP;
    /// a CPTP completion off the range of `E(t1,t0)` is not searched.
    Inconclusive {
        candidate: SuperOperator<T>,
        cptp: CptpReport<T>,
        reason: String,
    },
}

impl<T: Real> QDivisibility<T> {
    pub fn is_divisible(&self) -> bool {
        matches!(self, QDivisibility::Divisible { .. })
    }

    pub fn witness(&self) -> Option<&SuperOperator<T>> {
        match self {
            QDivisibility::Divisible { witness, .. } => Some(witness),
            _ => None,
        }
    }
}

/// Looks for a channel `Ẽ` with `E(t2,t0) = Ẽ ∘ E(t1,t0)`.
pub fn q_divisibility_check<T: Real>(
    e_20: &SuperOperator<T>,
    e_10: &SuperOperator<T>,
    tolerance: T,
    tol: &Tolerances,
) -> Result<QDivisibility<T>> {
    linalg::ensure_dim(e_20.dim, e_10.dim)?;
    let rank_10 = linalg::numerical_rank(e_10.matrix(), tol.pinv_rel);
    let rank_20 = linalg::numerical_rank(e_20.matrix(), tol.pinv_rel);
    if rank_10 < rank_20 {
        return Ok(QDivisibility::Indivisible(QObstruction::RankDeficit { rank_10, rank_20 }));
    }

    let check_tol = Tolerances {
        tp: tolerance.as_f64(),
        ..*tol
    };
    if linalg::condition_number(e_10.matrix()) < tol.condition_cap {
        let witness = SuperOperator {
            matrix: e_20.matrix() * linalg::inverse(e_10.matrix())?,
            dim: e_10.dim,
        };
        let cptp = check_cptp(&witness, &check_tol);
        if cptp.is_cptp() {
            return Ok(QDivisibility::Divisible {
                witness,
                cptp,
                route: QRoute::Inverse,
            });
        }
        return Ok(QDivisibility::Indivisible(QObstruction::UniqueFactorNotCptp { cptp }));
    }

    let candidate = SuperOperator {
        matrix: e_20.matrix() * linalg::pseudo_inverse(e_10.matrix(), tol.pinv_rel)?,
        dim: e_10.dim,
    };
    let residual = linalg::max_abs_c(&(candidate.matrix() * e_10.matrix() - e_20.matrix()));
    if residual > tolerance {
        return Ok(QDivisibility::Indivisible(QObstruction::RangeMismatch { residual }));
    }
    let cptp = check_cptp(&candidate, &check_tol);
    if cptp.is_cptp() {
        Ok(QDivisibility::Divisible {
            witness: candidate,
            cptp,
            route: QRoute::PseudoInverse,
        })
    } else {
        Ok(QDivisibility::Inconclusive {
            candidate,
            cptp,
            reason: "pseudo-inverse factor is not CPTP; completions off the range of E(t1,t0) were not searched"
                .into(),
        })
    }
}
