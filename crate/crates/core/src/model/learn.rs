//! Fitting `psi_prior` from random explorations and choosing `psi_obs` on
//! validation houses.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{clamp_probability, Edge, ObservationTally, SemanticModel};
use crate::agents::{run_leaps_episode, AgentConfig};
use crate::error::{Error, Result};
use crate::eval::EpisodeSpec;
use crate::signal::{Grid, SignalVocabulary, SymMatrix};
use crate::world::HouseContext;

/// Random-exploration settings for prior samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSampling {
    /// Exploration length in primitive steps.
    pub explore_steps: u32,
    /// Samples per edge per house.
    pub samples_per_edge: u32,
    /// Primitive steps a random explorer needs to change rooms. Much larger
    /// than the sub-policy's `steps_per_move`: undirected wandering rarely
    /// finds a door.
    pub steps_per_move: u32,
}

impl Default for PriorSampling {
    fn default() -> Self {
        PriorSampling {
            explore_steps: 300,
            samples_per_edge: 50,
            steps_per_move: 100,
        }
    }
}

impl PriorSampling {
    /// Walk length in room moves.
    pub fn moves(&self) -> usize {
        (self.explore_steps / self.steps_per_move.max(1)) as usize
    }
}

/// Collect binary reachability samples from random walks in `houses`.
///
/// For each room-graph signal `i` present in a house, `samples_per_edge`
/// walks start in a uniformly chosen room carrying `i`. A walk yields, for
/// every `j > i`, the sample "some visited room carried `j`", and for every
/// object `o`, the sample "some visited room carried `i` and held `o`".
/// Pairs whose lower signal is missing from a house get no samples from it.
pub fn collect_prior_samples(
    vocab: &SignalVocabulary,
    houses: &[HouseContext],
    sampling: &PriorSampling,
    seed: u64,
) -> Result<ObservationTally> {
    if sampling.steps_per_move == 0 {
        return Err(Error::config("prior.steps_per_move", "must be at least 1"));
    }
    for (idx, h) in houses.iter().enumerate() {
        if h.signal_len() != vocab.len() {
            return Err(Error::InvalidHouse(format!(
                "house {idx} has {} signals, vocabulary has {}",
                h.signal_len(),
                vocab.len()
            )));
        }
    }
    let moves = sampling.moves();
    let tallies: Vec<ObservationTally> = houses
        .par_iter()
        .enumerate()
        .map(|(idx, house)| sample_house(vocab, house, moves, sampling.samples_per_edge, crate::derive_seed(seed, idx as u64)))
        .collect();
    let mut total = ObservationTally::new(vocab);
    for t in &tallies {
        total.merge(t);
    }
    Ok(total)
}

fn sample_house(vocab: &SignalVocabulary, house: &HouseContext, moves: usize, reps: u32, seed: u64) -> ObservationTally {
    let n = vocab.room_nodes();
    let k_o = vocab.k_objects();
    let mut tally = ObservationTally::new(vocab);
    let present: u64 = (0..house.num_rooms()).fold(0, |m, r| m | 1 << house.room_signal(r));
    let room_objects = |r: usize| -> u64 { (0..k_o).filter(|&o| house.contains_object(r, o)).fold(0, |m, o| m | 1 << o) };

    for i in 0..n {
        let starts = house.rooms_with(i);
        if starts.is_empty() {
            log::debug!("house lacks signal {i}; no samples for its pairs");
            continue;
        }
        let reachable_objects: u64 = starts.iter().fold(0, |m, &r| m | room_objects(r));
        let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, i as u64));
        for _ in 0..reps {
            let mut room = starts[rng.gen_range(0..starts.len())];
            let mut seen = 1u64 << house.room_signal(room);
            let mut held = room_objects(room);
            for _ in 0..moves {
                if seen == present && held == reachable_objects {
                    break;
                }
                let nbrs = house.neighbors(room);
                if nbrs.is_empty() {
                    break;
                }
                room = nbrs[rng.gen_range(0..nbrs.len())];
                seen |= 1 << house.room_signal(room);
                if house.room_signal(room) == i {
                    held |= room_objects(room);
                }
            }
            for j in i + 1..n {
                tally.record(Edge::unchecked(i, j), seen >> j & 1 == 1);
            }
            for o in 0..k_o {
                tally.record(Edge::unchecked(i, vocab.object_index(o)), held >> o & 1 == 1);
            }
        }
    }
    tally
}

/// Smoothed maximum-likelihood priors.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPrior {
    pub rooms: SymMatrix<f64>,
    pub objects: Grid<f64>,
}

/// `(n_pos + alpha) / (n_pos + n_neg + 2 alpha)` per edge, clamped. With
/// `alpha = 0` every edge needs at least one sample.
pub fn fit_prior_mle(vocab: &SignalVocabulary, tally: &ObservationTally, alpha: f64) -> Result<FittedPrior> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::config("prior.alpha", "smoothing must be a non-negative number"));
    }
    let estimate = |edge: Edge| -> Result<f64> {
        let c = tally.get(edge);
        let denom = c.total() as f64 + 2.0 * alpha;
        if denom == 0.0 {
            let (a, b) = edge.endpoints();
            return Err(Error::NoSamples { a, b });
        }
        Ok(clamp_probability((c.n_pos as f64 + alpha) / denom))
    };
    let n = vocab.room_nodes();
    let rooms = crate::signal::pairs(n)
        .map(|(i, j)| estimate(Edge::unchecked(i, j)))
        .collect::<Result<Vec<_>>>()?;
    let mut objects = Grid::filled(n, vocab.k_objects(), 0.5);
    for r in 0..n {
        for o in 0..vocab.k_objects() {
            objects.set(r, o, estimate(Edge::unchecked(r, vocab.object_index(o)))?);
        }
    }
    Ok(FittedPrior {
        rooms: SymMatrix::from_upper(n, rooms).expect("pair count matches"),
        objects,
    })
}

impl SemanticModel {
    pub fn from_fit(vocab: SignalVocabulary, fit: FittedPrior, psi_obs_0: f64, psi_obs_1: f64) -> Result<Self> {
        let has_objects = vocab.k_objects() > 0;
        let m = SemanticModel::new(vocab, fit.rooms, psi_obs_0, psi_obs_1)?;
        if has_objects {
            m.with_object_prior(fit.objects)
        } else {
            Ok(m)
        }
    }
}

/// Validation score of every candidate and the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best: (f64, f64),
    /// `(psi_obs_0, psi_obs_1, mean success)` per evaluated candidate, in grid order.
    pub scores: Vec<(f64, f64, f64)>,
}

/// Exhaustive search over `(psi_obs_0, psi_obs_1)` candidates: run the agent
/// on every validation episode and keep the highest mean success, breaking
/// ties by the smaller `psi_obs_0 + psi_obs_1`, then by grid order.
pub fn tune_psi_obs(
    grid: &[(f64, f64)],
    model: &SemanticModel,
    valid_houses: &[HouseContext],
    episodes: &[EpisodeSpec],
    agent: &AgentConfig,
) -> Result<TuneOutcome> {
    let (&first, rest) = grid.split_first().ok_or(Error::EmptyGrid)?;
    if rest.is_empty() {
        model.with_obs(first.0, first.1)?;
        return Ok(TuneOutcome {
            best: first,
            scores: Vec::new(),
        });
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &(o0, o1) in grid {
        let candidate = Arc::new(model.with_obs(o0, o1)?);
        let wins = episodes
            .par_iter()
            .map(|ep| {
                let house = valid_houses.get(ep.house).ok_or_else(|| {
                    Error::InvalidHouse(format!("episode {} references missing house {}", ep.id, ep.house))
                })?;
                run_leaps_episode(&candidate, house, ep.start, ep.goal, agent, ep.seed).map(|r| r.success as u64)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum::<u64>();
        let rate = if episodes.is_empty() { 0.0 } else { wins as f64 / episodes.len() as f64 };
        scores.push((o0, o1, rate));
    }
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.2 > best.2 || (s.2 == best.2 && s.0 + s.1 < best.0 + best.1) {
            best = s;
        }
    }
    Ok(TuneOutcome {
        best: (best.0, best.1),
        scores,
    })
}

/// The default candidate grid `{0.001, 0.01, 0.05} x {0.05, 0.15, 0.30}`.
pub fn default_obs_grid() -> Vec<(f64, f64)> {
    let mut grid = Vec::new();
    for o0 in [0.001, 0.01, 0.05] {
        for o1 in [0.05, 0.15, 0.30] {
            grid.push((o0, o1));
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EPSILON;
    use crate::world::{HouseContext, Room};

    fn tally_with(vocab: &SignalVocabulary, pos: u64, neg: u64) -> ObservationTally {
        let mut t = ObservationTally::new(vocab);
        let e = Edge::unchecked(0, 1);
        for _ in 0..pos {
            t.record(e, true);
        }
        for _ in 0..neg {
            t.record(e, false);
        }
        t
    }

    #[test]
    fn smoothed_mle_values() {
        let v = SignalVocabulary::roomnav();
        let fit = fit_prior_mle(&v, &tally_with(&v, 30, 20), 1.0).unwrap();
        assert!((fit.rooms.get(0, 1) - 31.0 / 52.0).abs() < 1e-15);
        assert_eq!(fit.rooms.get(2, 3), 0.5);
        let fit = fit_prior_mle(&v, &tally_with(&v, 50, 0), 0.0);
        // other edges have no samples at alpha = 0
        assert!(matches!(fit, Err(Error::NoSamples { .. })));
    }

    #[test]
    fn pure_mle_clamps_certain_edges() {
        let v = SignalVocabulary::new(vec!["a".into(), "b".into()], "none".into(), vec![]).unwrap();
        let mut t = tally_with(&v, 50, 0);
        t.record(Edge::unchecked(0, 2), false);
        t.record(Edge::unchecked(1, 2), true);
        t.record(Edge::unchecked(1, 2), false);
        let fit = fit_prior_mle(&v, &t, 0.0).unwrap();
        assert_eq!(fit.rooms.get(0, 1), 1.0 - EPSILON);
        assert_eq!(fit.rooms.get(0, 2), EPSILON);
        assert_eq!(fit.rooms.get(1, 2), 0.5);
    }

    fn two_room_house() -> HouseContext {
        let rooms = vec![
            Room { id: 0, room_type: Some(0), extent: 3.0 },
            Room { id: 1, room_type: Some(1), extent: 3.0 },
        ];
        HouseContext::new(8, 0, rooms, vec![(0, 1)], vec![], vec![0, 1]).unwrap()
    }

    #[test]
    fn zero_length_exploration_sees_only_the_start() {
        let v = SignalVocabulary::roomnav();
        let s = PriorSampling {
            explore_steps: 0,
            samples_per_edge: 5,
            steps_per_move: 10,
        };
        let t = collect_prior_samples(&v, &[two_room_house()], &s, 1).unwrap();
        assert_eq!(t.room(0, 1).n_pos, 0);
        assert_eq!(t.room(0, 1).n_neg, 5);
        // signal 1 starts contribute to pairs (1, j > 1)
        assert_eq!(t.room(1, 2).total(), 5);
        // absent signals contribute nothing
        assert_eq!(t.room(2, 3).total(), 0);
    }

    #[test]
    fn adjacent_pair_is_always_reached() {
        let v = SignalVocabulary::roomnav();
        let t = collect_prior_samples(&v, &[two_room_house()], &PriorSampling::default(), 1).unwrap();
        assert_eq!(t.room(0, 1).n_pos, 50);
        assert_eq!(t.room(0, 1).n_neg, 0);
        assert_eq!(t.room(0, 5).n_neg, 50);
    }

    #[test]
    fn empty_grid_is_an_error_and_singletons_short_circuit() {
        let m = SemanticModel::uniform(SignalVocabulary::roomnav(), 0.5, 0.001, 0.15).unwrap();
        let cfg = AgentConfig::default();
        assert!(matches!(tune_psi_obs(&[], &m, &[], &[], &cfg), Err(Error::EmptyGrid)));
        let out = tune_psi_obs(&[(0.01, 0.3)], &m, &[], &[], &cfg).unwrap();
        assert_eq!(out.best, (0.01, 0.3));
    }

    #[test]
    fn ties_go_to_the_smaller_sum() {
        // no episodes: every candidate scores zero
        let m = SemanticModel::uniform(SignalVocabulary::roomnav(), 0.5, 0.001, 0.15).unwrap();
        let out = tune_psi_obs(&[(0.05, 0.3), (0.001, 0.15), (0.01, 0.05)], &m, &[], &[], &AgentConfig::default()).unwrap();
        assert_eq!(out.best, (0.01, 0.05));
        assert!(default_obs_grid().contains(&(0.001, 0.15)));
        assert_eq!(default_obs_grid().len(), 9);
    }
}
