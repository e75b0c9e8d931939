use std::time::Instant;

use crate::{Error, Result};

/// Minimal incremental SAT interface: clauses, solving under assumptions and
/// reading back the last model. Literals use DIMACS conventions.
pub trait SatBackend: Send {
    fn add_clause(&mut self, lits: &[i32]);
    /// `Ok(true)` for sat, `Ok(false)` for unsat, `Err(SolverLimit)` when the
    /// configured resource limit stopped the search.
    fn solve(&mut self, assumptions: &[i32]) -> Result<bool>;
    /// Truth value of `var` in the last model.
    fn value(&self, var: i32) -> bool;
    fn name(&self) -> &'static str;
}

/// Environment variable holding a per-call conflict limit.
pub const CONFLICT_LIMIT_VAR: &str = "RMLEARN_SOLVER_CONFLICTS";

/// Stops the search once a wall-clock deadline has passed.
struct Deadline(Option<Instant>);

impl cadical::Callbacks for Deadline {
    fn terminate(&mut self) -> bool {
        self.0.is_some_and(|at| Instant::now() >= at)
    }
}

pub struct CadicalBackend {
    solver: cadical::Solver<Deadline>,
    conflict_limit: Option<i32>,
}

impl CadicalBackend {
    pub fn new() -> Self {
        let conflict_limit = std::env::var(CONFLICT_LIMIT_VAR).ok().and_then(|v| v.trim().parse().ok());
        Self { solver: cadical::Solver::new(), conflict_limit }
    }

    pub fn with_conflict_limit(mut self, limit: Option<i32>) -> Self {
        self.conflict_limit = limit;
        self
    }

    /// Every solve after `at` ends with [`Error::SolverLimit`].
    pub fn with_deadline(mut self, at: Instant) -> Self {
        self.solver.set_callbacks(Some(Deadline(Some(at))));
        self
    }
}

impl Default for CadicalBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl SatBackend for CadicalBackend {
    fn add_clause(&mut self, lits: &[i32]) {
        self.solver.add_clause(lits.iter().copied());
    }

    fn solve(&mut self, assumptions: &[i32]) -> Result<bool> {
        if let Some(n) = self.conflict_limit {
            // limits only apply to the next call
            self.solver
                .set_limit("conflicts", n)
                .map_err(|e| Error::Invariant(format!("cannot set solver limit: {e:?}")))?;
        }
        self.solver.solve_with(assumptions.iter().copied()).ok_or(Error::SolverLimit)
    }

    fn value(&self, var: i32) -> bool {
        self.solver.value(var).unwrap_or(false)
    }

    fn name(&self) -> &'static str {
        "cadical"
    }
}
