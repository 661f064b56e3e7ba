//! Dense two-phase simplex for problems in standard form
//! `A x = b, x >= 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index enters, ties in the
//! ratio test go to the lowest basic index), so the method terminates
//! without cycling. The solver is generic over [`LpScalar`], which is
//! implemented for `f32`, `f64` and exact [`BigRational`] arithmetic.

use std::fmt::Debug;
use std::ops::Neg;

use num_rational::BigRational;
use num_traits::{Num, Signed};

/// Field the simplex tableau is computed in.
pub trait LpScalar: Clone + PartialOrd + Num + Neg<Output = Self> + Debug {
    /// Strictly positive beyond the pivot tolerance of the type.
    fn is_pos(&self) -> bool;

    fn is_neg(&self) -> bool {
        (-self.clone()).is_pos()
    }

    fn near_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
}

impl LpScalar for f64 {
    fn is_pos(&self) -> bool {
        *self > 1e-11
    }
}

impl LpScalar for f32 {
    fn is_pos(&self) -> bool {
        *self > 1e-5
    }
}

impl LpScalar for BigRational {
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<F> {
    Optimal {
        x: Vec<F>,
        objective: F,
    },
    /// Phase one ended with positive artificial mass. `violated_rows` lists
    /// the equality constraints whose artificial variable stayed positive.
    Infeasible {
        infeasibility: F,
        violated_rows: Vec<usize>,
    },
    Unbounded,
    IterationLimit,
}

impl<F> LpOutcome<F> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. } | LpOutcome::Unbounded)
    }

    pub fn solution(&self) -> Option<&[F]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

/// Equality-constrained LP over nonnegative variables.
#[derive(Debug, Clone)]
pub struct LinearProgram<F> {
    n_vars: usize,
    rows: Vec<Vec<F>>,
    rhs: Vec<F>,
    max_iterations: usize,
}

impl<F: LpScalar> LinearProgram<F> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            rows: Vec::new(),
            rhs: Vec::new(),
            max_iterations: 100_000,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Adds `coeffs · x = rhs` and returns the row index.
    pub fn add_equality(&mut self, coeffs: Vec<F>, rhs: F) -> usize {
        assert_eq!(coeffs.len(), self.n_vars, "constraint width");
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    /// Phase one only: returns any basic feasible point.
    pub fn feasible_point(&self) -> LpOutcome<F> {
        self.solve(None)
    }

    /// Maximizes `objective · x` over the feasible set.
    pub fn maximize(&self, objective: &[F]) -> LpOutcome<F> {
        assert_eq!(objective.len(), self.n_vars, "objective width");
        self.solve(Some(objective))
    }

    fn solve(&self, objective: Option<&[F]>) -> LpOutcome<F> {
        let n = self.n_vars;
        let m = self.rows.len();
        let mut tab = Tableau::phase_one(&self.rows, &self.rhs, n);

        let mut cost = vec![F::zero(); n + m];
        for c in cost.iter_mut().skip(n) {
            *c = F::one();
        }
        match tab.run(&cost, |_| true, self.max_iterations) {
            RunStatus::Optimal => {}
            // the phase-one objective is bounded below by zero
            RunStatus::Unbounded => unreachable!("phase one cannot be unbounded"),
            RunStatus::IterationLimit => return LpOutcome::IterationLimit,
        }

        let infeasibility = tab.objective(&cost);
        if infeasibility.is_pos() {
            let mut violated_rows: Vec<usize> = (0..m)
                .filter(|&i| tab.basis[i] >= n && tab.rhs(i).is_pos())
                .map(|i| tab.basis[i] - n)
                .collect();
            violated_rows.sort_unstable();
            return LpOutcome::Infeasible {
                infeasibility,
                violated_rows,
            };
        }
        tab.drive_out_artificials(n);

        let Some(objective) = objective else {
            let x = tab.primal(n);
            return LpOutcome::Optimal {
                x,
                objective: F::zero(),
            };
        };

        let mut cost = vec![F::zero(); n + m];
        for (c, o) in cost.iter_mut().zip(objective) {
            *c = -o.clone();
        }
        match tab.run(&cost, |j| j < n, self.max_iterations) {
            RunStatus::Optimal => {}
            RunStatus::Unbounded => return LpOutcome::Unbounded,
            RunStatus::IterationLimit => return LpOutcome::IterationLimit,
        }
        let x = tab.primal(n);
        let value = x
            .iter()
            .zip(objective)
            .fold(F::zero(), |acc, (xi, ci)| acc + xi.clone() * ci.clone());
        LpOutcome::Optimal {
            x,
            objective: value,
        }
    }
}

enum RunStatus {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau<F> {
    /// Each row holds the constraint coefficients followed by the rhs.
    rows: Vec<Vec<F>>,
    basis: Vec<usize>,
    width: usize,
}

impl<F: LpScalar> Tableau<F> {
    fn phase_one(a: &[Vec<F>], b: &[F], n: usize) -> Self {
        let m = a.len();
        let width = n + m;
        let mut rows = Vec::with_capacity(m);
        for (i, (row, rhs)) in a.iter().zip(b).enumerate() {
            let flip = rhs.is_neg() || (rhs.near_zero() && *rhs < F::zero());
            let mut r = Vec::with_capacity(width + 1);
            for v in row {
                r.push(if flip { -v.clone() } else { v.clone() });
            }
            for k in 0..m {
                r.push(if k == i { F::one() } else { F::zero() });
            }
            r.push(if flip { -rhs.clone() } else { rhs.clone() });
            rows.push(r);
        }
        Self {
            rows,
            basis: (n..n + m).collect(),
            width,
        }
    }

    fn rhs(&self, i: usize) -> &F {
        &self.rows[i][self.width]
    }

    fn objective(&self, cost: &[F]) -> F {
        self.basis
            .iter()
            .enumerate()
            .fold(F::zero(), |acc, (i, &b)| acc + cost[b].clone() * self.rhs(i).clone())
    }

    fn reduced_cost(&self, cost: &[F], j: usize) -> F {
        let mut d = cost[j].clone();
        for (i, &b) in self.basis.iter().enumerate() {
            let a = &self.rows[i][j];
            if !cost[b].near_zero() && !a.near_zero() {
                d = d - cost[b].clone() * a.clone();
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c].clone();
            if f == F::zero() {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
            row[c] = F::zero();
        }
        self.basis[r] = c;
    }

    fn run(&mut self, cost: &[F], allowed: impl Fn(usize) -> bool, max_iter: usize) -> RunStatus {
        for _ in 0..max_iter {
            let mut is_basic = vec![false; self.width];
            for &b in &self.basis {
                is_basic[b] = true;
            }
            let entering = (0..self.width)
                .find(|&j| !is_basic[j] && allowed(j) && self.reduced_cost(cost, j).is_neg());
            let Some(j) = entering else {
                return RunStatus::Optimal;
            };

            let mut leaving: Option<(usize, F)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][j];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rhs(i).clone() / a.clone();
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br || (ratio == br && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leaving else {
                return RunStatus::Unbounded;
            };
            self.pivot(r, j);
        }
        RunStatus::IterationLimit
    }

    fn drive_out_artificials(&mut self, n: usize) {
        for i in 0..self.rows.len() {
            if self.basis[i] < n {
                continue;
            }
            if let Some(j) = (0..n).find(|&j| !self.rows[i][j].near_zero()) {
                self.pivot(i, j);
            }
        }
    }

    fn primal(&self, n: usize) -> Vec<F> {
        let mut x = vec![F::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs(i).clone();
            }
        }
        x
    }
}
