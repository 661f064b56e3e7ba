use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by the validators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Entries of probability vectors and kernels may dip this far below zero.
    pub prob: f64,
    /// Allowed deviation of a column sum from one.
    pub stoch: f64,
    pub herm: f64,
    /// Relative floor for the minimum eigenvalue of a PSD matrix.
    pub psd: f64,
    /// Completeness residual of a trace-preserving map.
    pub tp: f64,
    pub unitary: f64,
    /// Above this condition number the direct inverse is not used.
    pub condition_cap: f64,
    /// Relative singular value cutoff for pseudo-inverses and ranks.
    pub pinv_rel: f64,
    /// Kraus operators with smaller Frobenius norm are dropped.
    pub kraus_drop: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            prob: 1e-12,
            stoch: 1e-10,
            herm: 1e-10,
            psd: 1e-9,
            tp: 1e-10,
            unitary: 1e-10,
            condition_cap: 1e12,
            pinv_rel: 1e-12,
            kraus_drop: 1e-14,
        }
    }
}

impl Tolerances {
    /// Sets every validation tolerance to `tol`, leaving the structural
    /// cutoffs (condition cap, pseudo-inverse cutoff, Kraus drop) untouched.
    pub fn uniform(tol: f64) -> Self {
        Self {
            prob: tol,
            stoch: tol,
            herm: tol,
            psd: tol,
            tp: tol,
            unitary: tol,
            ..Self::default()
        }
    }
}
