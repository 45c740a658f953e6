//! Dense convex quadratic programming.
//!
//! Problems are posed in the column-per-constraint convention
//!
//! ```text
//!     minimize    1/2 x' G x + g0' x
//!     subject to  CE' x + ce0  = 0
//!                 CI' x + ci0 >= 0
//! ```
//!
//! [`solve`] first removes the equality constraints with an orthogonal
//! null-space basis and then runs the Goldfarb-Idnani dual active-set method
//! on the reduced, strictly convex problem. The dual method starts from the
//! unconstrained minimum and adds violated constraints one at a time while
//! keeping dual feasibility, so every iterate is optimal for the constraints
//! added so far.
//!
//! [`solve_equality`] solves the KKT system of an equality-only problem
//! directly.

mod active_set;
mod equality;
mod problem;

use nalgebra::DVector;
use thiserror::Error;

pub use active_set::solve;
pub use equality::solve_equality;
pub use problem::QProblem;

/// Default optimality/feasibility tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("inconsistent problem dimensions: {0}")]
    Dimension(String),
    #[error("Hessian is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("equality constraints are linearly dependent")]
    RankDeficientEqualities,
    #[error("Hessian is not positive definite on the equality null space, even after regularization")]
    NotPositiveDefinite,
    #[error("KKT matrix is singular")]
    SingularKkt,
    #[error("problem is infeasible; constraints {certificate:?} cannot be satisfied together")]
    Infeasible { certificate: Vec<usize> },
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("malformed problem dump: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Indices of the inequality constraints active at the solution.
    pub active_set: Vec<usize>,
    /// Multipliers of the equality constraints, one per column of `CE`.
    pub eq_multipliers: DVector<f64>,
    /// Multipliers of the active inequalities, aligned with `active_set`.
    pub ineq_multipliers: Vec<f64>,
    pub iterations: usize,
    /// Whether the Hessian needed a Tikhonov lift to factor.
    pub regularized: bool,
}

/// Infinity-norm residuals of the KKT conditions at a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `|G x + g0 - CE lambda_E - CI_A lambda_I|_inf`
    pub stationarity: f64,
    /// `|CE' x + ce0|_inf`
    pub equality: f64,
    /// Most negative inequality slack (0 when all are satisfied).
    pub inequality: f64,
    /// Most negative active-inequality multiplier (0 when all are non-negative).
    pub dual: f64,
}

impl QSolution {
    /// Multipliers for every inequality constraint; inactive ones are zero.
    pub fn full_ineq_multipliers(&self, m: usize) -> DVector<f64> {
        let mut lambda = DVector::zeros(m);
        for (&i, &u) in self.active_set.iter().zip(&self.ineq_multipliers) {
            lambda[i] = u;
        }
        lambda
    }

    pub fn kkt_residuals(&self, problem: &QProblem) -> KktResiduals {
        let lambda_i = self.full_ineq_multipliers(problem.m());
        let grad = &problem.g * &self.x + &problem.g0
            - &problem.ce * &self.eq_multipliers
            - &problem.ci * &lambda_i;
        let slack = problem.inequality_slack(&self.x);
        KktResiduals {
            stationarity: grad.amax(),
            equality: problem.equality_residual(&self.x).amax(),
            inequality: slack.iter().fold(0.0_f64, |acc, &s| acc.min(s)).abs(),
            dual: self
                .ineq_multipliers
                .iter()
                .fold(0.0_f64, |acc, &u| acc.min(u))
                .abs(),
        }
    }
}
