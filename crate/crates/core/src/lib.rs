//! Semantic-graph planning in procedurally generated houses.
//!
//! A Bayesian model over pairwise reachability of semantic signals (room
//! types, a none-signal, optional object types) is fitted from random
//! explorations of training houses, updated from bit-OR observations while an
//! agent explores an unseen house, and used to pick the next sub-target by
//! maximizing the joint belief along a path to the goal.
//!
//! Modules:
//! - [`model`]: priors, the observation channel, posterior inference, fitting
//! - [`planner`]: observation extraction and max-belief planning
//! - [`world`]: house generation and room-level dynamics
//! - [`agents`]: the replanning agent and baselines
//! - [`eval`]: episode protocols, stratified evaluation and reports

pub mod agents;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod planner;
pub mod signal;
pub mod world;

pub use error::{Error, Result};

/// Deterministically mix `stream` into `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
