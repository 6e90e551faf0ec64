//! Tree proof-of-position.
//!
//! A prover builds a tree of witnesses, each naming further witnesses among
//! its neighbours, and the tree is verified level by level against a
//! confirmation threshold. This crate provides the protocol itself
//! ([`build_tree`], [`verify`]), a graphical model with iid agent states
//! ([`model`]), an agent-based spatial simulator ([`world`]), and the
//! divergence metrics used to compare the two ([`metrics`]).

pub mod agent;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod params;
pub mod report;
pub mod tree;
pub mod verify;
pub mod world;

pub use agent::{AgentId, AgentState, Position, Velocity};
pub use error::{Error, Result};
pub use grid::GridSpec;
pub use metrics::{
    conditional_rate, global_jsd, jsd, pointwise_jsd, Confusion, JsdReport, MapKind, MapSource,
    PerformanceMap,
};
pub use model::{
    confirm_states, estimate_cell, exact_cell, sample_tree_outcome, sweep_grid, CellEstimate,
    NodeState, StatePriors,
};
pub use params::{level_sizes, DuplicatePolicy, TPoPParams, Threshold};
pub use tree::{
    build_tree, Confirmation, ConfirmationOracle, ConfirmationTable, TreeBundle, TreeNode,
    WitnessTree,
};
pub use verify::{verify, LevelTally, VerificationOutcome};
pub use world::{sweep_world, EpochResult, SightRule, World, WorldConfig};
