//! Linear-programming layer for the all-to-all schedule synthesizer.
//!
//! [`LpModel`] is a plain row-form model. It can be solved by the in-crate
//! reference revised simplex ([`solve_lp`]), by a registered external backend
//! (see [`Solver`]), or as an integer program through best-first
//! branch-and-bound ([`solve_ilp`]).

mod backend;
mod bnb;
mod lu;
mod model;
mod simplex;

use std::time::Duration;

pub use backend::{default_external, register_external, LpBackend, Solver, SolverKind};
#[cfg(feature = "highs")]
pub use backend::HighsBackend;
pub use bnb::{solve_ilp, IlpOptions, IlpReport};
pub use model::{LpModel, Relation, Row, RowId, Sense, Var};
pub use simplex::solve_lp;

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("solver backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// Solver tolerances, kept in one place so every backend and check agrees.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Primal feasibility tolerance on rows and bounds.
    pub feasibility: f64,
    /// Reduced-cost tolerance for declaring optimality.
    pub optimality: f64,
    /// Used when comparing objective values across solvers or formulations.
    pub comparison: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feasibility: 1e-9, optimality: 1e-9, comparison: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tolerances: Tolerances,
    /// Hard cap on simplex pivots (bound flips included).
    pub max_iterations: u64,
    pub time_limit: Option<Duration>,
    /// Number of eta updates between basis refactorizations.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_limit: usize,
    pub compute_duals: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerances: Tolerances::default(),
            max_iterations: 50_000_000,
            time_limit: None,
            refactor_interval: 100,
            degenerate_limit: 400,
            compute_duals: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the model's own sense.
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Row duals (one per row) in the model's own sense, when available.
    pub duals: Option<Vec<f64>>,
    pub iterations: u64,
    /// Free-form note from the solver, e.g. the reason for a limit status.
    pub diagnostics: String,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub(crate) fn without_point(status: LpStatus, n: usize, iterations: u64, diag: String) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            primal: vec![0.0; n],
            duals: None,
            iterations,
            diagnostics: diag,
        }
    }
}

/// Dual objective `sum(y_i * b_i) + sum(d_j * bound_j)` for a solution that
/// carries row duals; `None` otherwise.
///
/// Reduced costs are recomputed from `y`, and each structural variable
/// contributes its reduced cost times the bound it sits at. Equals the primal
/// objective at optimality (strong duality).
pub fn dual_objective(model: &LpModel, sol: &LpSolution) -> Option<f64> {
    let y = sol.duals.as_ref()?;
    let mut reduced = model.objective().to_vec();
    let mut obj = 0.0;
    for (i, row) in model.rows().iter().enumerate() {
        obj += y[i] * row.rhs;
        for &(j, a) in &row.coeffs {
            reduced[j] -= y[i] * a;
        }
    }
    for (j, &d) in reduced.iter().enumerate() {
        if d.abs() < 1e-12 {
            continue;
        }
        let lo = model.lower()[j];
        let hi = model.upper()[j];
        let x = sol.primal[j];
        // the variable must sit at a finite bound for a nonzero reduced cost
        let bound = if (x - lo).abs() <= (x - hi).abs() { lo } else { hi };
        if !bound.is_finite() {
            return None;
        }
        obj += d * bound;
    }
    Some(obj)
}
