//! Bounded-variable revised simplex for equality-form linear programs.
//!
//! Problems have the form `min c^T x  s.t.  A x = b,  l <= x <= u`, where
//! bounds may be infinite. The solver runs a dual simplex when the starting
//! basis is dual feasible (always the case for boxed variables) and falls
//! back to a two-phase primal simplex otherwise. Both primal values and the
//! equality-row multipliers are returned.

mod lu;
mod simplex;
mod sparse;

pub use sparse::CscMatrix;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("simplex exceeded the iteration limit of {0}")]
    IterationLimit(usize),
    #[error("numerical failure: basis residual {0:.3e} exceeds tolerance")]
    NumericalFailure(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `min cost^T x  s.t.  eq_matrix x = eq_rhs,  lower <= x <= upper`.
#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    pub cost: Vec<T>,
    pub eq_matrix: CscMatrix<T>,
    pub eq_rhs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    /// Problem with `x >= 0` bounds on every variable.
    pub fn nonnegative(cost: Vec<T>, eq_matrix: CscMatrix<T>, eq_rhs: Vec<T>) -> Self {
        let v = cost.len();
        LpProblem { cost, eq_matrix, eq_rhs, lower: vec![T::zero(); v], upper: vec![T::infinity(); v] }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let v = self.cost.len();
        let r = self.eq_rhs.len();
        if self.eq_matrix.ncols() != v || self.eq_matrix.nrows() != r {
            return Err(LpError::Malformed(format!(
                "matrix is {}x{}, expected {r}x{v}",
                self.eq_matrix.nrows(),
                self.eq_matrix.ncols()
            )));
        }
        if self.lower.len() != v || self.upper.len() != v {
            return Err(LpError::Malformed("bound vectors do not match the variable count".into()));
        }
        for j in 0..v {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Malformed(format!("variable {j} has invalid bounds")));
            }
            if self.lower[j] == T::infinity() || self.upper[j] == T::neg_infinity() {
                return Err(LpError::Malformed(format!("variable {j} has an infinite bound on the wrong side")));
            }
            if !self.cost[j].is_finite() {
                return Err(LpError::Malformed(format!("variable {j} has a non-finite cost")));
            }
        }
        if self.eq_rhs.iter().any(|b| !b.is_finite()) {
            return Err(LpError::Malformed("non-finite right-hand side".into()));
        }
        Ok(())
    }

    /// `c^T x`
    pub fn objective_at(&self, x: &[T]) -> T {
        self.cost.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }
}

/// Solver outcome. For non-optimal statuses the vectors hold the last iterate.
#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub primal: Vec<T>,
    /// One multiplier per equality row: `y = B^{-T} c_B`.
    pub dual: Vec<T>,
    /// `c - A^T y` for every variable.
    pub reduced_costs: Vec<T>,
    pub objective: T,
    pub iterations: usize,
    /// Final basis as variable indices; indices `>= num_vars` denote row logicals.
    pub basis: Vec<usize>,
}

impl<T: Scalar> LpSolution<T> {
    /// `b^T y + sum_j d_j x_j`, which equals the objective at an optimal basis.
    pub fn dual_objective(&self, problem: &LpProblem<T>) -> T {
        let by: T = problem.eq_rhs.iter().zip(&self.dual).map(|(&b, &y)| b * y).sum();
        let bound_terms: T = self.reduced_costs.iter().zip(&self.primal).map(|(&d, &x)| d * x).sum();
        by + bound_terms
    }
}

#[derive(Debug, Clone)]
pub struct LpOptions<T> {
    pub feas_tol: T,
    pub max_iters: usize,
    /// Optional starting basis (one variable per row, logicals as `num_vars + row`).
    pub initial_basis: Option<Vec<usize>>,
}

impl<T: Scalar> Default for LpOptions<T> {
    fn default() -> Self {
        LpOptions { feas_tol: T::lit(1e-9), max_iters: 1_000_000, initial_basis: None }
    }
}

pub fn solve_lp<T: Scalar>(problem: &LpProblem<T>, feas_tol: T, max_iters: usize) -> Result<LpSolution<T>, LpError> {
    solve_lp_with(problem, &LpOptions { feas_tol, max_iters, initial_basis: None })
}

pub fn solve_lp_with<T: Scalar>(problem: &LpProblem<T>, options: &LpOptions<T>) -> Result<LpSolution<T>, LpError> {
    problem.validate()?;
    simplex::Simplex::new(problem, options).run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bounded_variable_goes_to_upper() {
        let p = LpProblem {
            cost: vec![-1.0f64],
            eq_matrix: CscMatrix::zeros(0, 1),
            eq_rhs: vec![],
            lower: vec![0.0],
            upper: vec![1.0],
        };
        let s = solve_lp(&p, 1e-9, 100).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] - 1.0).abs() < 1e-12);
        assert!((s.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_simplex_face() {
        let p = LpProblem::nonnegative(vec![1.0f64, 1.0], CscMatrix::from_dense(&[vec![1.0, 1.0]]), vec![1.0]);
        let s = solve_lp(&p, 1e-9, 100).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.dual[0] - 1.0).abs() < 1e-12);
        assert!((s.primal[0] + s.primal[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_vertex() {
        // x1 + 2 x2 = 4, x1 - x2 = 1 has the unique solution (2, 1)
        let p = LpProblem::nonnegative(
            vec![-2.0f64, -3.0],
            CscMatrix::from_dense(&[vec![1.0, 2.0], vec![1.0, -1.0]]),
            vec![4.0, 1.0],
        );
        let s = solve_lp(&p, 1e-9, 100).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] - 2.0).abs() < 1e-12);
        assert!((s.primal[1] - 1.0).abs() < 1e-12);
        assert!((s.objective + 7.0).abs() < 1e-12);
        assert!((s.dual_objective(&p) - s.objective).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let infeasible = LpProblem::nonnegative(vec![1.0, 1.0], CscMatrix::from_dense(&[vec![1.0, 1.0]]), vec![-1.0]);
        assert_eq!(solve_lp(&infeasible, 1e-9, 100).unwrap().status, LpStatus::Infeasible);

        let unbounded = LpProblem::nonnegative(vec![-1.0, 0.0], CscMatrix::from_dense(&[vec![1.0, -1.0]]), vec![1.0]);
        assert_eq!(solve_lp(&unbounded, 1e-9, 100).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_negative_bounds() {
        // min x1 + x2, x1 free, x2 in [-2, 3], x1 - x2 = 1
        let p = LpProblem {
            cost: vec![1.0f64, 1.0],
            eq_matrix: CscMatrix::from_dense(&[vec![1.0, -1.0]]),
            eq_rhs: vec![1.0],
            lower: vec![f64::NEG_INFINITY, -2.0],
            upper: vec![f64::INFINITY, 3.0],
        };
        let s = solve_lp(&p, 1e-9, 100).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[1] + 2.0).abs() < 1e-12);
        assert!((s.objective + 3.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let p = LpProblem::nonnegative(
            vec![-2.0, -3.0, -1.0],
            CscMatrix::from_dense(&[vec![1.0, 2.0, 1.0], vec![1.0, -1.0, 2.0]]),
            vec![4.0, 1.0],
        );
        assert_eq!(solve_lp(&p, 1e-9, 0).unwrap_err(), LpError::IterationLimit(0));
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let p = LpProblem::nonnegative(vec![1.0], CscMatrix::from_dense(&[vec![1.0, 1.0]]), vec![1.0]);
        assert!(matches!(solve_lp(&p, 1e-9, 10), Err(LpError::Malformed(_))));
    }

    #[test]
    fn single_precision_instantiation() {
        let p = LpProblem::nonnegative(
            vec![-2.0f32, -3.0],
            CscMatrix::from_dense(&[vec![1.0f32, 2.0], vec![1.0, -1.0]]),
            vec![4.0, 1.0],
        );
        let s = solve_lp(&p, 1e-5f32, 100).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 7.0).abs() < 1e-4);
    }
}
