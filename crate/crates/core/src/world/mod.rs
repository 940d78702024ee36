//! Room-granularity house simulator.
//!
//! Houses are undirected room graphs with typed rooms and object placements.
//! Agents move one room per macro-move; each macro-move costs
//! `steps_per_move` primitive steps.

mod dynamics;
mod extractor;
mod generator;
pub(crate) mod house;

use serde::{Deserialize, Serialize};

pub use dynamics::{geodesic_distance, optimal_plan_steps, random_walk, step_lateral, step_subpolicy, SubPolicyProfile};
pub use extractor::{noisy_signal, ExtractorNoise, ExtractorState};
pub use generator::{generate_house, GeneratorConfig};
pub use house::{HouseContext, ObjectPlacement, Room};

use crate::error::{Error, Result};

/// The eight RoomNav target room types.
pub const ROOMNAV_TYPES: [&str; 8] = [
    "kitchen",
    "living_room",
    "dining_room",
    "bedroom",
    "bathroom",
    "office",
    "garage",
    "outdoor",
];

/// A probability given once for every signal or individually per signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rate {
    Uniform(f64),
    PerSignal(Vec<f64>),
}

impl Rate {
    pub fn get(&self, signal: usize) -> f64 {
        match self {
            Rate::Uniform(p) => *p,
            Rate::PerSignal(v) => v.get(signal).copied().unwrap_or(0.0),
        }
    }

    pub fn validate(&self, field: &str, len: usize) -> Result<()> {
        let values: &[f64] = match self {
            Rate::Uniform(p) => std::slice::from_ref(p),
            Rate::PerSignal(v) => {
                if v.len() != len {
                    return Err(Error::config(
                        field,
                        format!("expected {len} per-signal values, got {}", v.len()),
                    ));
                }
                v
            }
        };
        match values.iter().find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p))) {
            Some(p) => Err(Error::config(field, format!("{p} is not a probability"))),
            None => Ok(()),
        }
    }
}

impl Default for Rate {
    fn default() -> Self {
        Rate::Uniform(0.0)
    }
}
