//! Generic optimization kernels: a certified LP solver, min-cost and max
//! flow on capacitated networks, and a cutting-plane loop for linear
//! objectives with one added Euclidean-norm term.

mod cutting;
mod flow;
mod lp;

pub use cutting::{
    solve_norm_augmented, solve_norm_augmented_with, NormAugmentedSolution, NormMap,
};
pub use flow::{max_flow, solve_min_cost_flow, Arc, FlowNetwork, FlowSolution, FlowStatus};
pub use lp::{solve_lp, solve_lp_with, DualCertificate, LinearProgram, LpSolution, LpStatus, Row};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerances and limits shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Absolute bound on any constraint violation of a returned point.
    pub feas_tol: f64,
    /// Relative primal/dual gap accepted as a proof of optimality.
    pub gap_tol: f64,
    /// Reduced-cost threshold for pricing.
    pub optimality_tol: f64,
    pub max_iterations: usize,
    /// Pivots between two refactorisations of the basis.
    pub refactor_every: usize,
    /// Relative gap at which the cutting-plane loop stops.
    pub cut_gap_tol: f64,
    pub max_cuts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-7,
            optimality_tol: 1e-10,
            max_iterations: 200_000,
            refactor_every: 100,
            cut_gap_tol: 1e-6,
            max_cuts: 200,
        }
    }
}

#[derive(Debug, Error, Clone)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("cut limit reached after {} cuts with relative gap {:.3e}", .best.cuts, .best.relative_gap)]
    CutLimitExceeded { best: Box<NormAugmentedSolution> },
}
