use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HouseContext, Rate};
use crate::error::{Error, Result};

/// Parameterized stand-in for a goal-conditioned sub-policy `mu(T, theta)`.
///
/// From a room bordering one that satisfies the target, the policy steps into
/// a satisfying room with probability `p_adj(target)`; otherwise it makes a
/// lateral move: it stays put (searching the room) with
/// probability `lateral_stay`, else moves to a uniformly chosen neighbor.
/// Each move costs `steps_per_move` primitive steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubPolicyProfile {
    pub p_adj: Rate,
    pub lateral_stay: f64,
    pub steps_per_move: u32,
}

impl Default for SubPolicyProfile {
    fn default() -> Self {
        SubPolicyProfile {
            p_adj: Rate::Uniform(0.9),
            lateral_stay: 0.0,
            steps_per_move: 10,
        }
    }
}

impl SubPolicyProfile {
    pub fn validate(&self, signals: usize) -> Result<()> {
        self.p_adj.validate("subpolicy.p_adj", signals)?;
        if !(self.lateral_stay.is_finite() && (0.0..1.0).contains(&self.lateral_stay)) {
            return Err(Error::config("subpolicy.lateral_stay", "must be in [0, 1)"));
        }
        if self.steps_per_move == 0 {
            return Err(Error::config("subpolicy.steps_per_move", "must be at least 1"));
        }
        Ok(())
    }
}

/// One macro-move of the sub-policy toward `target`. Returns the next room and
/// the primitive steps consumed.
pub fn step_subpolicy<R: Rng + ?Sized>(
    house: &HouseContext,
    room: usize,
    target: usize,
    profile: &SubPolicyProfile,
    rng: &mut R,
) -> (usize, u32) {
    let cost = profile.steps_per_move;
    let nbrs = house.neighbors(room);
    if nbrs.is_empty() {
        return (room, cost);
    }
    let mut hits = nbrs.iter().copied().filter(|&n| house.satisfies(n, target)).peekable();
    if hits.peek().is_some() {
        let hits: Vec<usize> = hits.collect();
        if rng.gen_bool(profile.p_adj.get(target)) {
            return (hits[rng.gen_range(0..hits.len())], cost);
        }
    }
    (step_lateral(house, room, profile, rng), cost)
}

/// One undirected move under the profile's lateral distribution.
pub fn step_lateral<R: Rng + ?Sized>(house: &HouseContext, room: usize, profile: &SubPolicyProfile, rng: &mut R) -> usize {
    let nbrs = house.neighbors(room);
    if nbrs.is_empty() || (profile.lateral_stay > 0.0 && rng.gen_bool(profile.lateral_stay)) {
        return room;
    }
    nbrs[rng.gen_range(0..nbrs.len())]
}

/// Uniform-neighbor walk of exactly `steps` moves; returns all `steps + 1`
/// visited rooms starting with `start`.
pub fn random_walk<R: Rng + ?Sized>(house: &HouseContext, start: usize, steps: usize, rng: &mut R) -> Vec<usize> {
    let mut path = Vec::with_capacity(steps + 1);
    path.push(start);
    let mut room = start;
    for _ in 0..steps {
        let nbrs = house.neighbors(room);
        if !nbrs.is_empty() {
            room = nbrs[rng.gen_range(0..nbrs.len())];
        }
        path.push(room);
    }
    path
}

/// Shortest room-graph hop count from `start` to the nearest room satisfying `goal`.
pub fn optimal_plan_steps(house: &HouseContext, start: usize, goal: usize) -> Result<usize> {
    house
        .hops_from(start)
        .into_iter()
        .enumerate()
        .filter(|&(r, _)| house.satisfies(r, goal))
        .filter_map(|(_, d)| d)
        .min()
        .ok_or(Error::Unreachable { start, goal })
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Metric distance in meters from `start` to the nearest goal room, crossing
/// each door at a cost of half of both room extents.
pub fn geodesic_distance(house: &HouseContext, start: usize, goal: usize) -> Result<f64> {
    let rooms = house.rooms();
    let mut dist = vec![f64::INFINITY; rooms.len()];
    let mut heap = BinaryHeap::from([Frontier(0.0, start)]);
    dist[start] = 0.0;
    while let Some(Frontier(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if house.satisfies(u, goal) {
            return Ok(d);
        }
        for &v in house.neighbors(u) {
            let nd = d + 0.5 * (rooms[u].extent + rooms[v].extent);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Frontier(nd, v));
            }
        }
    }
    Err(Error::Unreachable { start, goal })
}
