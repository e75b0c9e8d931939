//! CNF encoding of the inference problem, model enumeration and
//! canonicalization of the decoded hypotheses.

pub mod backend;
pub mod encoding;
pub mod hypothesis;

pub use backend::{CadicalBackend, SatBackend};
pub use encoding::{
    add_negatives_incremental, decode_model, encode, encode_with, encode_model, CnfInstance, EncodingParams, SolveStats, VarName,
};
pub use hypothesis::{
    canonicalize, group_size, orbit_size, sufficient_depth, Hypothesis, HypothesisRecord, HypothesisSet,
};
