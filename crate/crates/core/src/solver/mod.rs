//! Dense convex micro-solvers for the subproblems emitted by the sum-rate and
//! power-minimization algorithms, plus the Riemannian initializer.

pub mod barrier;
pub mod box_qcqp;
pub mod quad_max;
pub mod rcg;
pub mod socp;

pub use box_qcqp::{solve_box_qcqp_min, BoxQcqp, QuadConstraint as BoxConstraint};
pub use quad_max::{solve_quad_max, ConstraintMatrix, QuadMaxConstraint, QuadMaxProblem};
pub use rcg::{rcg_unit_modulus, RcgReport};
pub use socp::{solve_a_socp_min, solve_a_socp_restricted, solve_socp_power, ASocpData};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub bisection_tol: f64,
    /// Factor by which the barrier weight grows between centering steps.
    pub barrier_mu: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-7,
            max_iter: 400,
            bisection_tol: 1e-13,
            barrier_mu: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub status: Status,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub objective: f64,
    /// Multipliers of the coupling constraints, in the order they were given.
    pub multipliers: Vec<f64>,
}

impl SolveReport {
    pub fn infeasible(objective: f64) -> Self {
        Self {
            status: Status::Infeasible,
            kkt_residual: f64::INFINITY,
            iterations: 0,
            objective,
            multipliers: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
