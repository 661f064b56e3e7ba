//! Seeded generators for test instances and demos.

use nalgebra::{Complex, ComplexField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::dynamics::GkslGenerator;
use crate::error::Result;
use crate::kernels::{ProbabilityVector, RateMatrix};
use crate::lifts::{DensityOperator, KrausMap};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::scalar::Real;
use crate::tolerance::Tolerances;

/// ChaCha8-backed sampler; identical seeds give identical streams.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn index(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.rng.random_range(lo..=hi_inclusive)
    }

    fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn simplex_point(&mut self, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| self.rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// Uniform (flat Dirichlet) point of the probability simplex.
    pub fn probability_vector<T: Real>(&mut self, n: usize) -> ProbabilityVector<T> {
        let entries = self.simplex_point(n).into_iter().map(T::lit).collect();
        ProbabilityVector::new(entries, &Tolerances::default()).expect("simplex point")
    }

    /// Column-stochastic matrix with independent flat-Dirichlet columns.
    pub fn stochastic_matrix<T: Real>(&mut self, n: usize) -> RMatrix<T> {
        let mut m = RMatrix::zeros(n, n);
        for c in 0..n {
            for (r, x) in self.simplex_point(n).into_iter().enumerate() {
                m[(r, c)] = T::lit(x);
            }
        }
        m
    }

    pub fn complex_gaussian<T: Real>(&mut self, rows: usize, cols: usize) -> CMatrix<T> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_fn(rows, cols, |_, _| {
            Complex::new(T::lit(s * self.gaussian()), T::lit(s * self.gaussian()))
        })
    }

    /// `rows x cols` matrix with orthonormal columns (`rows ≥ cols`), from the
    /// phase-corrected QR factor of a complex Gaussian matrix.
    pub fn isometry<T: Real>(&mut self, rows: usize, cols: usize) -> CMatrix<T> {
        assert!(rows >= cols, "an isometry needs rows >= cols");
        let qr = self.complex_gaussian::<T>(rows, cols).qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..cols {
            let d = r[(j, j)];
            let modulus = d.modulus();
            if modulus > T::zero() {
                let phase = d / Complex::new(modulus, T::zero());
                for z in q.column_mut(j).iter_mut() {
                    *z *= phase;
                }
            }
        }
        q
    }

    /// Haar-distributed unitary.
    pub fn unitary<T: Real>(&mut self, n: usize) -> CMatrix<T> {
        self.isometry(n, n)
    }

    /// Random channel with `k` Kraus operators cut from an `nk x n` isometry.
    pub fn kraus_map<T: Real>(&mut self, n: usize, k: usize, tol: &Tolerances) -> Result<KrausMap<T>> {
        let v = self.isometry::<T>(n * k, n);
        let ops = (0..k).map(|b| v.rows(b * n, n).into_owned()).collect();
        KrausMap::new(ops, tol)
    }

    /// Rate matrix with off-diagonal rates uniform in `[0, max_rate)`.
    pub fn rate_matrix<T: Real>(&mut self, n: usize, max_rate: f64) -> RateMatrix<T> {
        let mut r = RMatrix::<T>::zeros(n, n);
        for c in 0..n {
            let mut out = T::zero();
            for row in 0..n {
                if row != c {
                    let x = T::lit(self.uniform(0.0, max_rate));
                    r[(row, c)] = x;
                    out += x;
                }
            }
            r[(c, c)] = -out;
        }
        RateMatrix::new(r, &Tolerances::default()).expect("columns sum to zero by construction")
    }

    /// Full-rank density operator `G G† / Tr(G G†)`.
    pub fn density_operator<T: Real>(&mut self, n: usize) -> DensityOperator<T> {
        let g = self.complex_gaussian::<T>(n, n);
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityOperator::new(linalg::hermitian_part(&(m / tr)), &Tolerances::default())
            .expect("Gram matrix is a density operator")
    }

    pub fn hermitian<T: Real>(&mut self, n: usize, scale: f64) -> CMatrix<T> {
        let g = self.complex_gaussian::<T>(n, n);
        linalg::hermitian_part(&g) * Complex::new(T::lit(scale), T::zero())
    }

    pub fn gksl_generator<T: Real>(&mut self, n: usize, n_jumps: usize, scale: f64) -> GkslGenerator<T> {
        let h = self.hermitian(n, scale);
        let s = Complex::new(T::lit(scale), T::zero());
        let jumps = (0..n_jumps).map(|_| self.complex_gaussian::<T>(n, n) * s).collect();
        GkslGenerator::new(h, jumps, &Tolerances::default()).expect("Hermitian part is Hermitian")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::validate_kernel;
    use crate::lifts::check_cptp;

    #[test]
    fn seeds_are_reproducible() {
        let a: CMatrix<f64> = Sampler::new(3).unitary(3);
        let b: CMatrix<f64> = Sampler::new(3).unitary(3);
        assert_eq!(a, b);
        let c: CMatrix<f64> = Sampler::new(4).unitary(3);
        assert_ne!(a, c);
    }

    #[test]
    fn samples_satisfy_their_invariants() {
        let mut s = Sampler::new(11);
        let tol = Tolerances::default();
        for n in 2..=5 {
            let m: RMatrix<f64> = s.stochastic_matrix(n);
            assert!(validate_kernel(&m, &tol).unwrap().pass);
            assert!(linalg::unitarity_residual(&s.unitary::<f64>(n)) < 1e-12);
            let k = s.kraus_map::<f64>(n, 3, &tol).unwrap();
            assert!(check_cptp(&k, &tol).is_cptp());
            assert!(s.density_operator::<f64>(n).min_eigenvalue() > -1e-12);
        }
    }
}
