use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HouseContext, ObjectPlacement, Room, ROOMNAV_TYPES};
use crate::error::{Error, Result};
use crate::signal::SignalVocabulary;

/// Parameters of the house distribution.
///
/// A spanning tree is grown one room at a time, joining an outside room to the
/// tree through a (tree room, outside room) pair drawn with weight
/// `affinity + attach_floor`; each
/// remaining pair then becomes adjacent with probability
/// `extra_edge_rate * affinity`. Affinity between typed rooms is
/// `co_occurrence`; any pair involving an untyped room uses `untyped_affinity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub room_types: Vec<String>,
    pub none_signal: String,
    pub object_types: Vec<String>,
    pub type_weights: Vec<f64>,
    /// Maximum rooms of each type per house; once every type is capped the
    /// remaining rooms are untyped.
    pub type_caps: Vec<usize>,
    pub co_occurrence: Vec<Vec<f64>>,
    pub untyped_rate: f64,
    pub untyped_affinity: f64,
    pub attach_floor: f64,
    pub room_count: [usize; 2],
    pub extra_edge_rate: f64,
    /// `K x K_o` probability that a room of each type holds each object type.
    pub object_propensity: Vec<Vec<f64>>,
    pub untyped_object_propensity: f64,
    pub extent_range: [f64; 2],
}

// kitchen, living_room, dining_room, bedroom, bathroom, office, garage, outdoor
#[rustfmt::skip]
const ROOMNAV_CO_OCCURRENCE: [[f64; 8]; 8] = [
    [0.05, 0.40, 0.90, 0.02, 0.05, 0.02, 0.15, 0.15],
    [0.40, 0.05, 0.60, 0.10, 0.10, 0.50, 0.10, 0.80],
    [0.90, 0.60, 0.02, 0.02, 0.02, 0.05, 0.02, 0.15],
    [0.02, 0.10, 0.02, 0.10, 0.90, 0.15, 0.01, 0.02],
    [0.05, 0.10, 0.02, 0.90, 0.02, 0.05, 0.02, 0.01],
    [0.02, 0.50, 0.05, 0.15, 0.05, 0.02, 0.05, 0.05],
    [0.15, 0.10, 0.02, 0.01, 0.02, 0.05, 0.02, 0.90],
    [0.15, 0.80, 0.15, 0.02, 0.01, 0.05, 0.90, 0.02],
];

const ROOMNAV_TYPE_WEIGHTS: [f64; 8] = [1.0, 1.2, 0.8, 2.0, 1.5, 0.6, 0.5, 0.8];
const ROOMNAV_TYPE_CAPS: [usize; 8] = [1, 1, 1, 3, 2, 1, 1, 1];

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            room_types: ROOMNAV_TYPES.iter().map(|s| s.to_string()).collect(),
            none_signal: "none".into(),
            object_types: Vec::new(),
            type_weights: ROOMNAV_TYPE_WEIGHTS.to_vec(),
            type_caps: ROOMNAV_TYPE_CAPS.to_vec(),
            co_occurrence: ROOMNAV_CO_OCCURRENCE.iter().map(|r| r.to_vec()).collect(),
            untyped_rate: 0.15,
            untyped_affinity: 0.3,
            attach_floor: 0.01,
            room_count: [6, 14],
            extra_edge_rate: 0.2,
            object_propensity: vec![Vec::new(); ROOMNAV_TYPES.len()],
            untyped_object_propensity: 0.05,
            extent_range: [3.0, 8.0],
        }
    }
}

impl GeneratorConfig {
    /// The default house distribution plus three object types tied to rooms.
    pub fn objectnav() -> Self {
        // bed, sofa, fridge
        #[rustfmt::skip]
        let propensity = vec![
            vec![0.00, 0.05, 0.90], // kitchen
            vec![0.02, 0.90, 0.02], // living_room
            vec![0.00, 0.05, 0.10], // dining_room
            vec![0.95, 0.05, 0.00], // bedroom
            vec![0.00, 0.00, 0.00], // bathroom
            vec![0.05, 0.30, 0.02], // office
            vec![0.00, 0.02, 0.10], // garage
            vec![0.00, 0.05, 0.00], // outdoor
        ];
        GeneratorConfig {
            object_types: vec!["bed".into(), "sofa".into(), "fridge".into()],
            object_propensity: propensity,
            untyped_object_propensity: 0.02,
            ..Default::default()
        }
    }

    pub fn vocabulary(&self) -> Result<SignalVocabulary> {
        SignalVocabulary::new(
            self.room_types.clone(),
            self.none_signal.clone(),
            self.object_types.clone(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.room_types.len();
        let k_o = self.object_types.len();
        self.vocabulary().map_err(|e| Error::config("generator.room_types", e.to_string()))?;
        let prob = |field: &str, p: f64| -> Result<()> {
            if p.is_finite() && (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::config(field, format!("{p} is not in [0, 1]")))
            }
        };
        if self.type_weights.len() != k {
            return Err(Error::config("generator.type_weights", format!("expected {k} weights")));
        }
        if self.type_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("generator.type_weights", "weights must be non-negative"));
        }
        if self.type_caps.len() != k {
            return Err(Error::config("generator.type_caps", format!("expected {k} caps")));
        }
        if self.untyped_rate < 1.0 && self.type_weights.iter().zip(&self.type_caps).all(|(&w, &c)| w == 0.0 || c == 0) {
            return Err(Error::config("generator.type_weights", "no room type can be drawn"));
        }
        if self.co_occurrence.len() != k || self.co_occurrence.iter().any(|r| r.len() != k) {
            return Err(Error::config("generator.co_occurrence", format!("expected a {k}x{k} matrix")));
        }
        for i in 0..k {
            for j in 0..k {
                prob("generator.co_occurrence", self.co_occurrence[i][j])?;
                if self.co_occurrence[i][j] != self.co_occurrence[j][i] {
                    return Err(Error::config("generator.co_occurrence", "matrix must be symmetric"));
                }
            }
        }
        prob("generator.untyped_rate", self.untyped_rate)?;
        prob("generator.untyped_affinity", self.untyped_affinity)?;
        prob("generator.extra_edge_rate", self.extra_edge_rate)?;
        prob("generator.untyped_object_propensity", self.untyped_object_propensity)?;
        if !(self.attach_floor.is_finite() && self.attach_floor > 0.0) {
            return Err(Error::config("generator.attach_floor", "must be positive"));
        }
        let [lo, hi] = self.room_count;
        if lo < 1 || hi < lo {
            return Err(Error::config("generator.room_count", "need 1 <= min <= max"));
        }
        if self.object_propensity.len() != k || self.object_propensity.iter().any(|r| r.len() != k_o) {
            return Err(Error::config(
                "generator.object_propensity",
                format!("expected a {k}x{k_o} matrix"),
            ));
        }
        for p in self.object_propensity.iter().flatten() {
            prob("generator.object_propensity", *p)?;
        }
        let [e_lo, e_hi] = self.extent_range;
        if !(e_lo.is_finite() && e_hi.is_finite() && e_lo > 0.0 && e_hi >= e_lo) {
            return Err(Error::config("generator.extent_range", "need 0 < min <= max"));
        }
        Ok(())
    }

    fn affinity(&self, a: Option<usize>, b: Option<usize>) -> f64 {
        match (a, b) {
            (Some(a), Some(b)) => self.co_occurrence[a][b],
            _ => self.untyped_affinity,
        }
    }
}

/// Sample one house from the configured distribution.
pub fn generate_house(config: &GeneratorConfig, seed: u64) -> Result<HouseContext> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.room_types.len();
    let [lo, hi] = config.room_count;
    let n = rng.gen_range(lo..=hi);

    let mut used = vec![0usize; k];
    let rooms: Vec<Room> = (0..n)
        .map(|id| {
            let open: Vec<f64> = (0..k)
                .map(|t| if used[t] < config.type_caps[t] { config.type_weights[t] } else { 0.0 })
                .collect();
            let room_type = match WeightedIndex::new(&open) {
                Ok(d) if !rng.gen_bool(config.untyped_rate) => Some(d.sample(&mut rng)),
                _ => None,
            };
            if let Some(t) = room_type {
                used[t] += 1;
            }
            let [e_lo, e_hi] = config.extent_range;
            let extent = if e_hi > e_lo { rng.gen_range(e_lo..e_hi) } else { e_lo };
            Room { id, room_type, extent }
        })
        .collect();

    // Random spanning tree grown from room 0: each step joins one outside room
    // to the tree through a pair drawn with weight affinity + attach_floor.
    let mut adjacent = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut frontier: Vec<(usize, usize)> = Vec::with_capacity(n * n / 4);
    let mut weights: Vec<f64> = Vec::with_capacity(n * n / 4);
    for _ in 1..n {
        frontier.clear();
        weights.clear();
        for u in (0..n).filter(|&u| in_tree[u]) {
            for v in (0..n).filter(|&v| !in_tree[v]) {
                frontier.push((u, v));
                weights.push(config.affinity(rooms[u].room_type, rooms[v].room_type) + config.attach_floor);
            }
        }
        let (u, v) = frontier[WeightedIndex::new(&weights).expect("positive weights").sample(&mut rng)];
        in_tree[v] = true;
        adjacent[u][v] = true;
        adjacent[v][u] = true;
        edges.push((u.min(v), u.max(v)));
    }
    for a in 0..n {
        for b in a + 1..n {
            if adjacent[a][b] {
                continue;
            }
            let p = config.extra_edge_rate * config.affinity(rooms[a].room_type, rooms[b].room_type);
            if rng.gen_bool(p) {
                adjacent[a][b] = true;
                edges.push((a, b));
            }
        }
    }

    let k_o = config.object_types.len();
    let mut objects = Vec::new();
    for room in &rooms {
        for object in 0..k_o {
            let p = match room.room_type {
                Some(t) => config.object_propensity[t][object],
                None => config.untyped_object_propensity,
            };
            if rng.gen_bool(p) {
                objects.push(ObjectPlacement { object, room: room.id });
            }
        }
    }

    HouseContext::new(k, k_o, rooms, edges, objects, (0..n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        GeneratorConfig::default().validate().unwrap();
        GeneratorConfig::objectnav().validate().unwrap();
    }

    #[test]
    fn single_room_range_yields_single_room() {
        let cfg = GeneratorConfig {
            room_count: [1, 1],
            ..Default::default()
        };
        for seed in 0..20 {
            let h = generate_house(&cfg, seed).unwrap();
            assert_eq!(h.num_rooms(), 1);
            assert!(h.adjacency().is_empty());
        }
    }

    #[test]
    fn same_seed_same_house() {
        let cfg = GeneratorConfig::objectnav();
        let a = serde_json::to_string(&generate_house(&cfg, 11).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_house(&cfg, 11).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_house(&cfg, 12).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_impossible_configs() {
        let no_types = GeneratorConfig {
            type_weights: vec![0.0; 8],
            untyped_rate: 0.0,
            ..Default::default()
        };
        assert!(matches!(generate_house(&no_types, 0), Err(Error::InvalidConfig { .. })));
        let mut asym = GeneratorConfig::default();
        asym.co_occurrence[0][1] = 0.3;
        assert!(asym.validate().is_err());
        let bad_range = GeneratorConfig {
            room_count: [0, 3],
            ..Default::default()
        };
        assert!(bad_range.validate().is_err());
    }

    #[test]
    fn type_caps_bound_room_counts() {
        let cfg = GeneratorConfig {
            room_count: [12, 12],
            untyped_rate: 0.0,
            ..Default::default()
        };
        for seed in 0..200 {
            let h = generate_house(&cfg, seed).unwrap();
            for (t, &cap) in cfg.type_caps.iter().enumerate() {
                let n = (0..h.num_rooms()).filter(|&r| h.room_signal(r) == t).count();
                assert!(n <= cap, "seed {seed}: type {t} has {n} rooms, cap {cap}");
            }
        }
        let bad = GeneratorConfig {
            type_caps: vec![1; 3],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn all_untyped_houses_are_allowed() {
        let cfg = GeneratorConfig {
            untyped_rate: 1.0,
            ..Default::default()
        };
        let h = generate_house(&cfg, 3).unwrap();
        assert!(h.rooms().iter().all(|r| r.room_type.is_none()));
    }
}
