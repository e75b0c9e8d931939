//! Trajectory prefixes, behavior signatures and negative examples.

pub mod cache;
pub mod negatives;
pub mod signatures;
pub mod tree;

pub use negatives::{checked_negatives, materialize_negatives, MAX_MATERIALIZED_PAIRS, NegativeMode, NegativePair};
pub use signatures::{compute_signatures, compute_signatures_scoped, ClassRows, QueryScope, SignaturePartition, NO_CLASS};
pub use tree::{PrefixId, PrefixTree, DEFAULT_NODE_CAP, ROOT};
