use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("state index {state} out of range (|S| = {n_states})")]
    StateOutOfRange { state: usize, n_states: usize },

    #[error("trajectory is not feasible in the MDP at position {position}")]
    InfeasibleTrajectory { position: usize },

    #[error("soft value iteration did not converge after {iters} sweeps (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },

    #[error("prefix tree exceeds node cap {cap} ({count} nodes); use active mode or a smaller depth")]
    TreeOverflow { count: usize, cap: usize },

    #[error("{count} negative pairs exceed the materialization cap {cap}; sample them per terminal state instead")]
    PairOverflow { count: u128, cap: u128 },

    #[error("SAT solver resource limit reached")]
    SolverLimit,

    #[error("enumeration truncated at {cap} models; convergence cannot be certified")]
    Truncated { cap: usize },

    #[error("brute-force enumeration of {count} hypotheses exceeds cap {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 infeasible/overflow, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config { .. } => 1,
            Error::TreeOverflow { .. }
            | Error::PairOverflow { .. }
            | Error::SolverLimit
            | Error::Truncated { .. }
            | Error::EnumerationCap { .. }
            | Error::NotConverged { .. } => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
