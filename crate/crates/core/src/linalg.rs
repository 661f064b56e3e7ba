//! Dense real and complex matrix helpers.
//!
//! Vectorization is column stacking throughout: entry `(r, c)` of an
//! `n x n` operator sits at index `r + c * n` of its vector, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type RMatrix<T> = DMatrix<T>;
pub type CMatrix<T> = DMatrix<Complex<T>>;

pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

pub fn ensure_square<S>(m: &DMatrix<S>) -> Result<usize>
where
    S: nalgebra::Scalar,
{
    if m.nrows() == m.ncols() {
        Ok(m.nrows())
    } else {
        Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

pub fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub fn to_complex<T: Real>(m: &RMatrix<T>) -> CMatrix<T> {
    m.map(|x| Complex::new(x, T::zero()))
}

pub fn real_part<T: Real>(m: &CMatrix<T>) -> RMatrix<T> {
    m.map(|z| z.re)
}

pub fn max_imag<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.im.abs()))
}

pub fn max_abs<T: Real>(m: &RMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

pub fn max_abs_c<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.modulus()))
}

pub fn identity_c<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

/// `|i⟩⟨j|` in dimension `n`.
pub fn matrix_unit<T: Real>(n: usize, i: usize, j: usize) -> CMatrix<T> {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = Complex::new(T::one(), T::zero());
    m
}

pub fn basis_projector<T: Real>(n: usize, i: usize) -> CMatrix<T> {
    matrix_unit(n, i, i)
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn vectorize<T: Real>(m: &CMatrix<T>) -> DVector<Complex<T>> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize<T: Real>(v: &DVector<Complex<T>>, n: usize) -> CMatrix<T> {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// Index of entry `(row, col)` in the column-stacked vector of an `n x n` matrix.
pub fn vec_index(n: usize, row: usize, col: usize) -> usize {
    row + col * n
}

/// Entrywise `|u_ij|²`, i.e. `U ⊙ U*`.
pub fn mod_square<T: Real>(u: &CMatrix<T>) -> RMatrix<T> {
    u.map(|z| z.norm_sqr())
}

pub fn hermiticity_residual<T: Real>(m: &CMatrix<T>) -> T {
    max_abs_c(&(m - m.adjoint()))
}

pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()).scale(T::lit(0.5))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> DVector<T> {
    let mut eig = hermitian_part(m).symmetric_eigenvalues();
    eig.as_mut_slice()
        .sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

pub fn trace_c<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    m.trace()
}

/// `‖U†U − I‖_max`.
pub fn unitarity_residual<T: Real>(u: &CMatrix<T>) -> T {
    let n = u.nrows();
    max_abs_c(&(u.adjoint() * u - identity_c::<T>(n)))
}

/// Sum of moduli of the off-diagonal entries.
pub fn off_diagonal_mass<T: Real>(m: &CMatrix<T>) -> T {
    let mut acc = T::zero();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if r != c {
                acc += m[(r, c)].modulus();
            }
        }
    }
    acc
}

pub fn off_diagonal_mass_real<T: Real>(m: &RMatrix<T>) -> T {
    let mut acc = T::zero();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if r != c {
                acc += m[(r, c)].abs();
            }
        }
    }
    acc
}

pub fn singular_values<T: Real>(m: &CMatrix<T>) -> DVector<T> {
    m.clone().svd(false, false).singular_values
}

pub fn singular_values_real<T: Real>(m: &RMatrix<T>) -> DVector<T> {
    m.clone().svd(false, false).singular_values
}

fn condition_from<T: Real>(sv: &DVector<T>) -> f64 {
    if sv.is_empty() {
        return f64::INFINITY;
    }
    let max = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    let min = sv.iter().fold(sv[0], |a, &b| a.min(b));
    if min <= T::zero() {
        f64::INFINITY
    } else {
        (max / min).as_f64()
    }
}

/// 2-norm condition number (infinite when singular).
pub fn condition_number<T: Real>(m: &CMatrix<T>) -> f64 {
    condition_from(&singular_values(m))
}

pub fn condition_number_real<T: Real>(m: &RMatrix<T>) -> f64 {
    condition_from(&singular_values_real(m))
}

/// Rank with singular values below `rel · σ_max` treated as zero.
pub fn numerical_rank<T: Real>(m: &CMatrix<T>, rel: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    if max <= T::zero() {
        return 0;
    }
    let cut = max * T::lit(rel);
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn numerical_rank_real<T: Real>(m: &RMatrix<T>, rel: f64) -> usize {
    let sv = singular_values_real(m);
    let max = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    if max <= T::zero() {
        return 0;
    }
    let cut = max * T::lit(rel);
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn pseudo_inverse<T: Real>(m: &CMatrix<T>, rel: f64) -> Result<CMatrix<T>> {
    let sv = singular_values(m);
    let max = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    if max <= T::zero() {
        return Ok(CMatrix::zeros(m.ncols(), m.nrows()));
    }
    m.clone()
        .svd(true, true)
        .pseudo_inverse(max * T::lit(rel))
        .map_err(|e| Error::Numerical(e.to_string()))
}

pub fn inverse<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("matrix is singular".into()))
}

pub fn inverse_real<T: Real>(m: &RMatrix<T>) -> Result<RMatrix<T>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("matrix is singular".into()))
}

/// Matrix exponential by Padé scaling and squaring.
pub fn expm<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.exp()
}

pub fn expm_real<T: Real>(m: &RMatrix<T>) -> RMatrix<T> {
    m.exp()
}

/// Partial trace over the second tensor factor of an operator on
/// `C^n_a ⊗ C^n_b` (first factor slow-varying).
pub fn partial_trace_second<T: Real>(m: &CMatrix<T>, n_a: usize, n_b: usize) -> CMatrix<T> {
    let mut out = CMatrix::zeros(n_a, n_a);
    for i in 0..n_a {
        for j in 0..n_a {
            let mut acc = Complex::new(T::zero(), T::zero());
            for e in 0..n_b {
                acc += m[(i * n_b + e, j * n_b + e)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Block `(i, j)` of size `n_b` of an operator on `C^n_a ⊗ C^n_b`.
pub fn block<T: Real>(m: &CMatrix<T>, n_b: usize, i: usize, j: usize) -> CMatrix<T> {
    m.view((i * n_b, j * n_b), (n_b, n_b)).into_owned()
}

/// Total modulus of entries between distinct first-factor blocks.
pub fn block_off_diagonal_mass<T: Real>(m: &CMatrix<T>, n_a: usize, n_b: usize) -> T {
    let mut acc = T::zero();
    for i in 0..n_a {
        for j in 0..n_a {
            if i == j {
                continue;
            }
            for a in 0..n_b {
                for b in 0..n_b {
                    acc += m[(i * n_b + a, j * n_b + b)].modulus();
                }
            }
        }
    }
    acc
}

/// Standard single-qubit gates.
pub mod gates {
    use super::*;

    fn from_rows<T: Real>(rows: [[(f64, f64); 2]; 2]) -> CMatrix<T> {
        CMatrix::from_fn(2, 2, |r, c| {
            let (re, im) = rows[r][c];
            Complex::new(T::lit(re), T::lit(im))
        })
    }

    pub fn pauli_x<T: Real>() -> CMatrix<T> {
        from_rows([[(0.0, 0.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 0.0)]])
    }

    pub fn pauli_y<T: Real>() -> CMatrix<T> {
        from_rows([[(0.0, 0.0), (0.0, -1.0)], [(0.0, 1.0), (0.0, 0.0)]])
    }

    pub fn pauli_z<T: Real>() -> CMatrix<T> {
        from_rows([[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (-1.0, 0.0)]])
    }

    pub fn hadamard<T: Real>() -> CMatrix<T> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        from_rows([[(s, 0.0), (s, 0.0)], [(s, 0.0), (-s, 0.0)]])
    }

    /// `diag(1, i)`.
    pub fn phase_s<T: Real>() -> CMatrix<T> {
        from_rows([[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (0.0, 1.0)]])
    }

    /// Controlled flip on `C² ⊗ C²`, first factor is the control.
    pub fn cnot<T: Real>() -> CMatrix<T> {
        let mut m = CMatrix::zeros(4, 4);
        let one = Complex::new(T::one(), T::zero());
        m[(0, 0)] = one;
        m[(1, 1)] = one;
        m[(2, 3)] = one;
        m[(3, 2)] = one;
        m
    }

    /// `exp(-i H t)`.
    pub fn evolution<T: Real>(h: &CMatrix<T>, t: T) -> CMatrix<T> {
        expm(&h.map(|z| z * Complex::new(T::zero(), -t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vec_identity_holds() {
        let a = CMatrix::<f64>::from_fn(3, 3, |r, c| cplx(r as f64 + 0.5, c as f64 - 1.0));
        let x = CMatrix::<f64>::from_fn(3, 3, |r, c| cplx((r * c) as f64, 0.3 * r as f64));
        let b = CMatrix::<f64>::from_fn(3, 3, |r, c| cplx(1.0 - c as f64, (r + c) as f64));
        let lhs = vectorize(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vectorize(&x);
        assert_abs_diff_eq!(max_abs_c(&CMatrix::from_column_slice(9, 1, (lhs - rhs).as_slice())), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn vec_index_matches_column_stacking() {
        let m = matrix_unit::<f64>(3, 2, 1);
        let v = vectorize(&m);
        assert_eq!(v[vec_index(3, 2, 1)], cplx(1.0, 0.0));
    }

    #[test]
    fn expm_of_pauli_x_rotation() {
        let u = gates::evolution(&gates::pauli_x::<f64>(), 0.7);
        assert_abs_diff_eq!(u[(0, 0)].re, 0.7f64.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 0)].im, -(0.7f64.sin()), epsilon = 1e-14);
        assert!(unitarity_residual(&u) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = gates::hadamard::<f64>() * basis_projector::<f64>(2, 0) * gates::hadamard::<f64>();
        let b = basis_projector::<f64>(3, 2);
        let pt = partial_trace_second(&kron(&a, &b), 2, 3);
        assert!(max_abs_c(&(pt - a)) < 1e-15);
    }

    #[test]
    fn rank_and_condition() {
        let p = basis_projector::<f64>(2, 0);
        assert_eq!(numerical_rank(&p, 1e-12), 1);
        assert!(condition_number(&p).is_infinite());
        assert_abs_diff_eq!(condition_number(&gates::hadamard::<f64>()), 1.0, epsilon = 1e-12);
    }
}
