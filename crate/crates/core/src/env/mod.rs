//! MDP models, ground-truth machines, products and the bundled fixtures.

pub mod config;
pub mod fixtures;
pub mod grid;
mod machine;
mod mdp;
mod product;

pub use config::{build_ground_truth_rm, parse_fixture, FixtureConfig, MachineSpec};
pub use fixtures::Fixture;
pub use grid::{build_grid_mdp, GridConfig, Moves};
pub use machine::{rm_run, LabeledModel, LabeledRewardMachine};
pub use mdp::MdpModel;
pub use product::ProductMdp;
