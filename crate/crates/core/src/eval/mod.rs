//! Episode protocols, paired evaluation and reports.

mod report;
mod stats;

pub use report::{
    evaluate, read_report_csv, report_prior, summary_table, write_plot_csvs, write_traces, EvalReport, Improvement,
    PriorRow, ReportRow, StratumType, TraceLine,
};
pub use stats::{wilson_interval, WILSON_Z};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::AgentKind;
use crate::error::{Error, Result};
use crate::world::{geodesic_distance, ExtractorNoise, HouseContext};

/// Which signals episodes use as goals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    #[default]
    Rooms,
    Objects,
}

/// One agent in an evaluation. Settings not given here come from the
/// experiment-wide agent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub name: String,
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<ExtractorNoise>,
}

impl AgentEntry {
    pub fn new(kind: AgentKind) -> Self {
        AgentEntry {
            name: kind.to_string(),
            kind,
            noise: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalProtocol {
    /// Size of the uniformly sampled base pool.
    pub base_episodes: usize,
    /// Minimum episodes per plan-distance stratum `1..=strata`.
    pub stratum_floor: usize,
    pub strata: usize,
    pub horizons: Vec<u32>,
    pub agents: Vec<AgentEntry>,
    pub goals: GoalKind,
    /// Width of birth-distance bins, in the units of room extents.
    pub birth_bin: f64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            base_episodes: 5000,
            stratum_floor: 500,
            strata: 5,
            horizons: vec![300, 500, 1000],
            agents: [
                AgentKind::Leaps,
                AgentKind::PureSubpolicy,
                AgentKind::Random,
                AgentKind::OracleGraph,
            ]
            .into_iter()
            .map(AgentEntry::new)
            .collect(),
            goals: GoalKind::Rooms,
            birth_bin: 5.0,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::config("protocol.horizons", "need at least one positive horizon"));
        }
        if !(self.birth_bin.is_finite() && self.birth_bin > 0.0) {
            return Err(Error::config("protocol.birth_bin", "must be positive"));
        }
        let mut names: Vec<&str> = self.agents.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config("protocol.agents", format!("duplicate agent name {:?}", w[0])));
        }
        if names.iter().any(|n| n.is_empty()) {
            return Err(Error::config("protocol.agents", "agent names must be non-empty"));
        }
        Ok(())
    }
}

/// One evaluation episode, shared by every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub id: usize,
    pub house: usize,
    pub start: usize,
    pub goal: usize,
    pub plan_distance: usize,
    pub birth_distance: f64,
    pub seed: u64,
}

struct Candidate {
    house: usize,
    start: usize,
    goal: usize,
    distance: usize,
}

/// Sample the base pool uniformly (house, then spawn room, then goal among
/// those not satisfied at the spawn room), then top up plan-distance strata
/// `1..=strata` round-robin until each holds `stratum_floor` episodes.
pub fn build_protocol(houses: &[HouseContext], protocol: &EvalProtocol, seed: u64) -> Result<Vec<EpisodeSpec>> {
    let first = houses
        .first()
        .ok_or_else(|| Error::Unsatisfiable("the corpus has no houses".into()))?;
    let goals: Vec<usize> = match protocol.goals {
        GoalKind::Rooms => (0..first.room_types()).collect(),
        GoalKind::Objects => (0..first.object_types()).map(|o| first.room_types() + 1 + o).collect(),
    };

    // candidates[house][start slot] -> goals reachable and unsatisfied
    let mut by_start: Vec<Vec<Vec<Candidate>>> = Vec::with_capacity(houses.len());
    for (h, house) in houses.iter().enumerate() {
        if house.room_types() != first.room_types() || house.object_types() != first.object_types() {
            return Err(Error::InvalidHouse(format!("house {h} uses a different signal layout")));
        }
        let mut starts = Vec::new();
        for &start in house.spawn() {
            let hops = house.hops_from(start);
            let options: Vec<Candidate> = goals
                .iter()
                .filter(|&&g| !house.satisfies(start, g))
                .filter_map(|&g| {
                    (0..house.num_rooms())
                        .filter(|&r| house.satisfies(r, g))
                        .filter_map(|r| hops[r])
                        .min()
                        .map(|distance| Candidate {
                            house: h,
                            start,
                            goal: g,
                            distance,
                        })
                })
                .collect();
            if !options.is_empty() {
                starts.push(options);
            }
        }
        if !starts.is_empty() {
            by_start.push(starts);
        }
    }
    if by_start.is_empty() {
        return Err(Error::Unsatisfiable("no house has a reachable goal".into()));
    }

    let mut strata: BTreeMap<usize, Vec<&Candidate>> = BTreeMap::new();
    for c in by_start.iter().flatten().flatten() {
        strata.entry(c.distance).or_default().push(c);
    }
    if protocol.stratum_floor > 0 {
        let missing: Vec<usize> = (1..=protocol.strata).filter(|s| !strata.contains_key(s)).collect();
        if !missing.is_empty() {
            let achievable: Vec<String> = (1..=protocol.strata)
                .map(|s| format!("{s}: {}", strata.get(&s).map_or(0, |v| v.len())))
                .collect();
            return Err(Error::Unsatisfiable(format!(
                "plan-distance strata {missing:?} have no candidate episodes (distinct candidates per stratum: {})",
                achievable.join(", ")
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<&Candidate> = Vec::with_capacity(protocol.base_episodes);
    for _ in 0..protocol.base_episodes {
        let house = by_start.choose(&mut rng).expect("non-empty");
        let start = house.choose(&mut rng).expect("non-empty");
        chosen.push(start.choose(&mut rng).expect("non-empty"));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &chosen {
        *counts.entry(c.distance).or_default() += 1;
    }
    loop {
        let mut added = false;
        for s in 1..=protocol.strata {
            let have = counts.entry(s).or_default();
            if *have < protocol.stratum_floor {
                let pool = &strata[&s];
                chosen.push(pool[rng.gen_range(0..pool.len())]);
                *have += 1;
                added = true;
            }
        }
        if !added {
            break;
        }
    }

    chosen
        .into_iter()
        .enumerate()
        .map(|(id, c)| {
            Ok(EpisodeSpec {
                id,
                house: c.house,
                start: c.start,
                goal: c.goal,
                plan_distance: c.distance,
                birth_distance: geodesic_distance(&houses[c.house], c.start, c.goal)?,
                seed: crate::derive_seed(seed, id as u64),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::house::fixtures::chain;

    #[test]
    fn floor_zero_gives_the_base_pool() {
        let house = chain(8, &[Some(0), Some(1), Some(2), Some(3), Some(4), Some(5), Some(6)]);
        let p = EvalProtocol {
            base_episodes: 40,
            stratum_floor: 0,
            ..Default::default()
        };
        let eps = build_protocol(&[house], &p, 3).unwrap();
        assert_eq!(eps.len(), 40);
        assert!(eps.iter().all(|e| e.plan_distance >= 1));
    }

    #[test]
    fn top_up_fills_every_stratum() {
        let house = chain(8, &[Some(0), Some(1), Some(2), Some(3), Some(4), Some(5), Some(6)]);
        let p = EvalProtocol {
            base_episodes: 10,
            stratum_floor: 20,
            ..Default::default()
        };
        let eps = build_protocol(&[house], &p, 3).unwrap();
        for s in 1..=5 {
            assert!(eps.iter().filter(|e| e.plan_distance == s).count() >= 20);
        }
        let ids: Vec<usize> = eps.iter().map(|e| e.id).collect();
        assert_eq!(ids, (0..eps.len()).collect::<Vec<_>>());
    }

    #[test]
    fn short_house_cannot_fill_far_strata() {
        let house = chain(8, &[Some(0), Some(1), Some(2)]);
        let err = build_protocol(&[house], &EvalProtocol::default(), 0).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Unsatisfiable(_)));
        assert!(msg.contains("[3, 4, 5]"), "{msg}");
    }

    #[test]
    fn duplicate_agent_names_are_rejected() {
        let mut p = EvalProtocol::default();
        p.agents.push(AgentEntry::new(AgentKind::Random));
        assert!(p.validate().is_err());
    }
}
