//! Inference of labeled reward machine models (transition function plus
//! state labeling) from raw state trajectories of an MDP.
//!
//! The pipeline is:
//!
//! 1. [`env`] builds the MDP model, the ground-truth labeled reward machine
//!    and their product.
//! 2. [`policy`] solves the entropy-regularized product MDP and exposes the
//!    resulting history policy through a query-counting oracle.
//! 3. [`traces`] enumerates feasible trajectory prefixes, groups them by the
//!    behavior they induce and turns disagreements into negative examples.
//! 4. [`satsynth`] compiles negative examples into CNF, enumerates every model
//!    and canonicalizes the decoded hypotheses up to renaming.
//! 5. [`active`] grows the evidence with trajectory-pair queries that split
//!    the current hypothesis set.
//!
//! [`verify`] holds brute-force oracles used to cross-check the SAT route, and
//! [`cli`] is the experiment driver behind the `rmlearn` binary.
//!
//! All state, node and proposition indices are 0-based in the API. Text
//! formats (config files, exported hypotheses) use 1-based indices.

pub mod active;
pub mod cli;
pub mod env;
pub mod error;
pub mod policy;
pub mod satsynth;
pub mod traces;
pub mod verify;

pub use error::{Error, Result};
