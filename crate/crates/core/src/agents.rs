//! Episode-scoped agents: the belief-update / plan / execute loop and the
//! baselines that share its sub-policy machinery.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BeliefState, SemanticModel};
use crate::planner::{self, best_plan, extract_observations, NegativeRule, ObservationBatch, Plan, SemanticTrace};
use crate::signal::{SignalVector, SignalVocabulary};
use crate::world::{
    geodesic_distance, noisy_signal, optimal_plan_steps, step_lateral, step_subpolicy, ExtractorNoise, ExtractorState,
    HouseContext, SubPolicyProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Leaps,
    Random,
    PureSubpolicy,
    OracleGraph,
}

impl AgentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgentKind::Leaps => "leaps",
            AgentKind::Random => "random",
            AgentKind::PureSubpolicy => "pure_subpolicy",
            AgentKind::OracleGraph => "oracle_graph",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// `N`, primitive steps between belief updates.
    pub replan_interval: u32,
    /// `H`, episode budget in primitive steps.
    pub horizon: u32,
    pub subpolicy: SubPolicyProfile,
    /// Semantic extractor noise; `None` reads ground-truth signals.
    pub noise: Option<ExtractorNoise>,
    pub negatives: NegativeRule,
    /// Keep beliefs across consecutive episodes in the same house.
    pub carry_belief: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            kind: AgentKind::Leaps,
            replan_interval: 30,
            horizon: 300,
            subpolicy: SubPolicyProfile::default(),
            noise: None,
            negatives: NegativeRule::Xor,
            carry_belief: false,
        }
    }
}

impl AgentConfig {
    pub fn new(kind: AgentKind, horizon: u32) -> Self {
        AgentConfig {
            kind,
            horizon,
            ..Default::default()
        }
    }

    pub fn validate(&self, signals: usize) -> Result<()> {
        self.subpolicy.validate(signals)?;
        if let Some(noise) = &self.noise {
            noise.validate(signals)?;
        }
        if self.replan_interval == 0 || self.replan_interval > self.horizon {
            return Err(Error::config("replan_interval", "need 1 <= N <= H"));
        }
        if !self.replan_interval.is_multiple_of(self.subpolicy.steps_per_move) {
            return Err(Error::config(
                "replan_interval",
                format!(
                    "N = {} is not a multiple of steps_per_move = {}",
                    self.replan_interval, self.subpolicy.steps_per_move
                ),
            ));
        }
        Ok(())
    }
}

/// One decision point of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub step: u32,
    pub s_s: SignalVector,
    /// Observations applied to the beliefs right before this decision.
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<ObservationBatch>,
    pub plan: Option<Plan>,
    pub sub_target: Option<usize>,
    /// Digest of the beliefs the plan was computed from.
    pub belief_digest: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub windows: Vec<WindowRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps: u32,
    pub goal: usize,
    pub optimal_plan_steps: usize,
    pub birth_distance: f64,
    pub trace: EpisodeTrace,
}

/// Stream ids for per-episode random number generators.
const DYNAMICS_STREAM: u64 = 0;
const EXTRACTOR_STREAM: u64 = 1;

/// Signals as the agent perceives them, true or through the noisy extractor.
struct Perception {
    noise: Option<(ExtractorNoise, ExtractorState, ChaCha8Rng)>,
}

impl Perception {
    fn new(config: &AgentConfig, house: &HouseContext, seed: u64) -> Self {
        let noise = config.noise.clone().map(|n| {
            let state = ExtractorState::new(house.signal_len(), house.room_types());
            let rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, EXTRACTOR_STREAM));
            (n, state, rng)
        });
        Perception { noise }
    }

    /// Readings for `steps` primitive steps spent in `room`. Without noise the
    /// signal is constant, so one reading stands for the whole move.
    fn observe(&mut self, house: &HouseContext, room: usize, steps: u32, out: &mut Vec<SignalVector>) {
        let truth = house.true_signal(room);
        match &mut self.noise {
            None => out.push(truth),
            Some((noise, state, rng)) => {
                for _ in 0..steps {
                    out.push(noisy_signal(truth, noise, state, rng));
                }
            }
        }
    }

    /// Let the extractor settle on the birth room before the clock starts.
    fn prime(&mut self, house: &HouseContext, room: usize) -> SignalVector {
        let warmup = self.noise.as_ref().map_or(1, |(n, _, _)| n.window);
        let mut buf = Vec::new();
        self.observe(house, room, warmup, &mut buf);
        *buf.last().expect("at least one reading")
    }
}

/// Source of sub-target plans inside the replanning loop.
trait SubTargetPlanner {
    fn plan(&mut self, s_s: &SignalVector, room: usize) -> Result<Plan>;
    fn observe(&mut self, batch: &ObservationBatch) -> Result<()>;
    fn digest(&self) -> Option<String>;
}

struct BeliefPlanner {
    belief: BeliefState,
    goal: usize,
}

impl SubTargetPlanner for BeliefPlanner {
    fn plan(&mut self, s_s: &SignalVector, _room: usize) -> Result<Plan> {
        best_plan(&self.belief, s_s, self.goal)
    }

    fn observe(&mut self, batch: &ObservationBatch) -> Result<()> {
        self.belief.update(&batch.samples)
    }

    fn digest(&self) -> Option<String> {
        Some(self.belief.digest())
    }
}

/// Plans on the house's true room graph: the signals of a shortest room path
/// from the current room to the nearest goal room.
struct OraclePlanner<'h> {
    house: &'h HouseContext,
    goal: usize,
}

impl SubTargetPlanner for OraclePlanner<'_> {
    fn plan(&mut self, _s_s: &SignalVector, room: usize) -> Result<Plan> {
        let h = self.house;
        let n = h.num_rooms();
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([room]);
        seen[room] = true;
        let mut found = None;
        while let Some(u) = queue.pop_front() {
            if h.satisfies(u, self.goal) {
                found = Some(u);
                break;
            }
            for &v in h.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        let mut r = found.ok_or(Error::Unreachable {
            start: room,
            goal: self.goal,
        })?;
        let mut rooms = vec![r];
        while r != room {
            r = parent[r];
            rooms.push(r);
        }
        rooms.reverse();
        let mut tau: Vec<usize> = rooms.iter().map(|&r| h.room_signal(r)).collect();
        if self.goal > h.room_types() {
            tau.push(self.goal);
        } else {
            *tau.last_mut().expect("non-empty path") = self.goal;
        }
        let sub_target = tau.get(1).copied().unwrap_or(self.goal);
        Ok(Plan {
            tau,
            score: 1.0,
            sub_target,
        })
    }

    fn observe(&mut self, _batch: &ObservationBatch) -> Result<()> {
        Ok(())
    }

    fn digest(&self) -> Option<String> {
        None
    }
}

fn check_episode(house: &HouseContext, vocab: &SignalVocabulary, start: usize, goal: usize) -> Result<(usize, f64)> {
    if house.signal_len() != vocab.len() {
        return Err(Error::InvalidHouse(format!(
            "house has {} signals, model vocabulary has {}",
            house.signal_len(),
            vocab.len()
        )));
    }
    vocab.check_index(goal)?;
    if start >= house.num_rooms() {
        return Err(Error::InvalidHouse(format!("start room {start} does not exist")));
    }
    if house.satisfies(start, goal) {
        return Err(Error::InvalidHouse(format!("goal {goal} is already satisfied in start room {start}")));
    }
    let plan_steps = optimal_plan_steps(house, start, goal)?;
    Ok((plan_steps, geodesic_distance(house, start, goal)?))
}

/// The replanning loop shared by the belief-driven agent and the oracle.
fn run_planning_loop(
    planner: &mut dyn SubTargetPlanner,
    vocab: &SignalVocabulary,
    house: &HouseContext,
    start: usize,
    goal: usize,
    config: &AgentConfig,
    seed: u64,
) -> Result<(bool, u32, EpisodeTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, DYNAMICS_STREAM));
    let mut perception = Perception::new(config, house, seed);
    let cost = config.subpolicy.steps_per_move;
    let (horizon, interval) = (config.horizon, config.replan_interval);

    let mut trace = EpisodeTrace::default();
    let mut room = start;
    let mut t = 0u32;
    let mut s_s = perception.prime(house, room);
    let mut window = vec![s_s];
    let mut pending: Option<ObservationBatch> = None;
    let mut readings = Vec::new();

    while t + cost <= horizon {
        let plan = planner.plan(&s_s, room)?;
        let target = plan.sub_target;
        trace.windows.push(WindowRecord {
            step: t,
            s_s,
            batch: pending.take(),
            sub_target: Some(target),
            plan: Some(plan),
            belief_digest: planner.digest(),
        });
        loop {
            let (next, spent) = step_subpolicy(house, room, target, &config.subpolicy, &mut rng);
            room = next;
            t += spent;
            readings.clear();
            perception.observe(house, room, spent, &mut readings);
            window.extend_from_slice(&readings);
            s_s = *readings.last().expect("at least one reading");
            if house.satisfies(room, goal) {
                return Ok((true, t, trace));
            }
            let reached = readings.iter().any(|r| r.get(target));
            if t.is_multiple_of(interval) {
                let steps = SemanticTrace::new(vocab, std::mem::replace(&mut window, vec![s_s]))?;
                let batch = extract_observations(vocab, &steps, config.negatives);
                planner.observe(&batch)?;
                pending = Some(batch);
            }
            if planner::replan_schedule(t, interval, reached) || t + cost > horizon {
                break;
            }
        }
    }
    Ok((false, t, trace))
}

/// Run the belief-driven agent from a fresh prior.
pub fn run_leaps_episode(
    model: &Arc<SemanticModel>,
    house: &HouseContext,
    start: usize,
    goal: usize,
    config: &AgentConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    run_leaps_episode_from(BeliefState::new(Arc::clone(model)), house, start, goal, config, seed).map(|(r, _)| r)
}

/// Run the belief-driven agent starting from `belief`; returns the final beliefs too.
pub fn run_leaps_episode_from(
    belief: BeliefState,
    house: &HouseContext,
    start: usize,
    goal: usize,
    config: &AgentConfig,
    seed: u64,
) -> Result<(EpisodeResult, BeliefState)> {
    let vocab = belief.vocab().clone();
    config.validate(vocab.len())?;
    let (optimal_plan_steps, birth_distance) = check_episode(house, &vocab, start, goal)?;
    let mut planner = BeliefPlanner { belief, goal };
    let (success, steps, trace) = run_planning_loop(&mut planner, &vocab, house, start, goal, config, seed)?;
    let result = EpisodeResult {
        success,
        steps,
        goal,
        optimal_plan_steps,
        birth_distance,
        trace,
    };
    Ok((result, planner.belief))
}

/// Run a baseline agent: a uniform random walk, the goal sub-policy alone, or
/// the replanning loop driven by the true room graph.
pub fn run_baseline_episode(
    kind: AgentKind,
    vocab: &SignalVocabulary,
    house: &HouseContext,
    start: usize,
    goal: usize,
    config: &AgentConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    config.validate(vocab.len())?;
    let (optimal_plan_steps, birth_distance) = check_episode(house, vocab, start, goal)?;
    let (success, steps, trace) = match kind {
        AgentKind::Leaps => {
            return Err(Error::config("kind", "leaps is not a baseline"));
        }
        AgentKind::OracleGraph => {
            let mut planner = OraclePlanner { house, goal };
            run_planning_loop(&mut planner, vocab, house, start, goal, config, seed)?
        }
        AgentKind::Random | AgentKind::PureSubpolicy => {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, DYNAMICS_STREAM));
            let cost = config.subpolicy.steps_per_move;
            let mut room = start;
            let mut t = 0u32;
            let mut success = false;
            while t + cost <= config.horizon {
                room = if kind == AgentKind::Random {
                    step_lateral(house, room, &config.subpolicy, &mut rng)
                } else {
                    step_subpolicy(house, room, goal, &config.subpolicy, &mut rng).0
                };
                t += cost;
                if house.satisfies(room, goal) {
                    success = true;
                    break;
                }
            }
            let trace = EpisodeTrace {
                windows: vec![WindowRecord {
                    step: 0,
                    s_s: house.true_signal(start),
                    batch: None,
                    plan: None,
                    sub_target: (kind == AgentKind::PureSubpolicy).then_some(goal),
                    belief_digest: None,
                }],
            };
            (success, t, trace)
        }
    };
    Ok(EpisodeResult {
        success,
        steps,
        goal,
        optimal_plan_steps,
        birth_distance,
        trace,
    })
}

/// Dispatch on `config.kind`.
pub fn run_episode(
    model: &Arc<SemanticModel>,
    house: &HouseContext,
    start: usize,
    goal: usize,
    config: &AgentConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    match config.kind {
        AgentKind::Leaps => run_leaps_episode(model, house, start, goal, config, seed),
        kind => run_baseline_episode(kind, model.vocab(), house, start, goal, config, seed),
    }
}
