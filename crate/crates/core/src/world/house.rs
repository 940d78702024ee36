use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub id: usize,
    /// Room type index `0..K`; `None` for untyped rooms, which emit the none-signal.
    #[serde(rename = "type")]
    pub room_type: Option<usize>,
    /// Characteristic size in meters, used for geodesic distances.
    pub extent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectPlacement {
    pub object: usize,
    pub room: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HouseRecord {
    room_types: usize,
    object_types: usize,
    rooms: Vec<Room>,
    adjacency: Vec<(usize, usize)>,
    objects: Vec<ObjectPlacement>,
    spawn: Vec<usize>,
}

/// A ground-truth semantic environment (the context `c`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HouseRecord", into = "HouseRecord")]
pub struct HouseContext {
    k: usize,
    k_objects: usize,
    rooms: Vec<Room>,
    adjacency: Vec<(usize, usize)>,
    objects: Vec<ObjectPlacement>,
    spawn: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    object_masks: Vec<u64>,
}

impl TryFrom<HouseRecord> for HouseContext {
    type Error = Error;
    fn try_from(r: HouseRecord) -> Result<Self> {
        HouseContext::new(r.room_types, r.object_types, r.rooms, r.adjacency, r.objects, r.spawn)
    }
}

impl From<HouseContext> for HouseRecord {
    fn from(h: HouseContext) -> Self {
        HouseRecord {
            room_types: h.k,
            object_types: h.k_objects,
            rooms: h.rooms,
            adjacency: h.adjacency,
            objects: h.objects,
            spawn: h.spawn,
        }
    }
}

impl HouseContext {
    /// Build and validate a house: ids are `0..n` in order, types are within
    /// `0..k`, edges are canonical `(a, b)` with `a < b`, the graph is connected.
    pub fn new(
        k: usize,
        k_objects: usize,
        rooms: Vec<Room>,
        mut adjacency: Vec<(usize, usize)>,
        objects: Vec<ObjectPlacement>,
        spawn: Vec<usize>,
    ) -> Result<Self> {
        let n = rooms.len();
        if n == 0 {
            return Err(Error::InvalidHouse("house has no rooms".into()));
        }
        if k + 1 + k_objects > crate::signal::MAX_SIGNALS {
            return Err(Error::InvalidHouse("too many signal types".into()));
        }
        for (i, room) in rooms.iter().enumerate() {
            if room.id != i {
                return Err(Error::InvalidHouse(format!("room at position {i} has id {}", room.id)));
            }
            if room.room_type.is_some_and(|t| t >= k) {
                return Err(Error::InvalidHouse(format!("room {i} has unknown type")));
            }
            if !(room.extent.is_finite() && room.extent > 0.0) {
                return Err(Error::InvalidHouse(format!("room {i} has non-positive extent")));
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for e in adjacency.iter_mut() {
            let (a, b) = (e.0.min(e.1), e.0.max(e.1));
            if a == b || b >= n {
                return Err(Error::InvalidHouse(format!("bad edge ({}, {})", e.0, e.1)));
            }
            *e = (a, b);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        adjacency.sort_unstable();
        if adjacency.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidHouse("duplicate edge".into()));
        }
        for list in neighbors.iter_mut() {
            list.sort_unstable();
        }
        let mut object_masks = vec![0u64; n];
        for o in &objects {
            if o.object >= k_objects || o.room >= n {
                return Err(Error::InvalidHouse(format!(
                    "object {} placed in room {} is out of range",
                    o.object, o.room
                )));
            }
            object_masks[o.room] |= 1 << o.object;
        }
        if spawn.iter().any(|&r| r >= n) {
            return Err(Error::InvalidHouse("spawn room out of range".into()));
        }
        let house = HouseContext {
            k,
            k_objects,
            rooms,
            adjacency,
            objects,
            spawn,
            neighbors,
            object_masks,
        };
        if house.component_sizes().len() != 1 {
            return Err(Error::InvalidHouse("room graph is not connected".into()));
        }
        Ok(house)
    }

    pub fn room_types(&self) -> usize {
        self.k
    }

    pub fn object_types(&self) -> usize {
        self.k_objects
    }

    /// Length of signal vectors for this house, `K+1+K_o`.
    pub fn signal_len(&self) -> usize {
        self.k + 1 + self.k_objects
    }

    pub fn num_rooms(&self) -> usize {
        self.rooms.len()
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn adjacency(&self) -> &[(usize, usize)] {
        &self.adjacency
    }

    pub fn objects(&self) -> &[ObjectPlacement] {
        &self.objects
    }

    pub fn spawn(&self) -> &[usize] {
        &self.spawn
    }

    pub fn neighbors(&self, room: usize) -> &[usize] {
        &self.neighbors[room]
    }

    /// Room-graph signal of a room: its type, or the none-signal `K`.
    pub fn room_signal(&self, room: usize) -> usize {
        self.rooms[room].room_type.unwrap_or(self.k)
    }

    pub fn contains_object(&self, room: usize, object: usize) -> bool {
        self.object_masks[room] >> object & 1 == 1
    }

    /// Whether being in `room` makes `signal` fire.
    pub fn satisfies(&self, room: usize, signal: usize) -> bool {
        if signal <= self.k {
            self.room_signal(room) == signal
        } else {
            self.contains_object(room, signal - self.k - 1)
        }
    }

    /// Ground-truth semantic signal of a room: the room-type bit (or none-bit)
    /// plus one bit per object type present in the room.
    pub fn true_signal(&self, room: usize) -> SignalVector {
        let mut v = SignalVector::zeros(self.signal_len());
        v.set(self.room_signal(room), true);
        for o in 0..self.k_objects {
            if self.contains_object(room, o) {
                v.set(self.k + 1 + o, true);
            }
        }
        v
    }

    pub fn rooms_with(&self, signal: usize) -> Vec<usize> {
        (0..self.num_rooms()).filter(|&r| self.satisfies(r, signal)).collect()
    }

    pub fn has_signal(&self, signal: usize) -> bool {
        (0..self.num_rooms()).any(|r| self.satisfies(r, signal))
    }

    /// BFS hop distances from `start` to every room.
    pub fn hops_from(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_rooms()];
        let mut queue = std::collections::VecDeque::from([start]);
        dist[start] = Some(0);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued rooms have a distance");
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Type-level adjacency: whether some room carrying signal `i` borders
    /// some room carrying signal `j`.
    pub fn signals_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency.iter().any(|&(a, b)| {
            let (sa, sb) = (self.room_signal(a), self.room_signal(b));
            (sa == i && sb == j) || (sa == j && sb == i)
        })
    }

    fn component_sizes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.num_rooms()];
        let mut sizes = Vec::new();
        for s in 0..self.num_rooms() {
            if seen[s] {
                continue;
            }
            let mut stack = vec![s];
            seen[s] = true;
            let mut size = 0;
            while let Some(u) = stack.pop() {
                size += 1;
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        sizes
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// A path house whose rooms carry the given types in order.
    pub fn chain(k: usize, types: &[Option<usize>]) -> HouseContext {
        let rooms = types
            .iter()
            .enumerate()
            .map(|(id, &room_type)| Room {
                id,
                room_type,
                extent: 4.0,
            })
            .collect();
        let edges = (1..types.len()).map(|i| (i - 1, i)).collect();
        HouseContext::new(k, 0, rooms, edges, vec![], (0..types.len()).collect()).unwrap()
    }
}
