//! Observation extraction and max-belief planning.
//!
//! A plan maximizes the product of edge beliefs along a simple path from a
//! currently active signal to the goal. Planning runs Dijkstra over
//! `-ln z_hat` weights from a virtual source attached at zero cost to every
//! active room-graph signal. Ties (within [`COST_TIE`]) prefer fewer edges,
//! then the lexicographically smallest index sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BeliefState, Edge, Observation};
use crate::signal::{SignalVector, SignalVocabulary};

/// Two path costs closer than this (in nats) are treated as equal.
pub const COST_TIE: f64 = 1e-12;

/// Which unordered pairs yield `y = 0` samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeRule {
    /// Only pairs with exactly one endpoint observed in the window.
    #[default]
    Xor,
    /// Every pair not jointly observed, including pairs with neither endpoint seen.
    All,
}

/// Signal vectors observed over one window, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticTrace(Vec<SignalVector>);

impl SemanticTrace {
    /// Every step must have the vocabulary's length and at least one room-graph
    /// bit (a room type or the none-signal) set.
    pub fn new(vocab: &SignalVocabulary, steps: Vec<SignalVector>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::MalformedTrace("trace is empty".into()));
        }
        for (t, s) in steps.iter().enumerate() {
            if s.len() != vocab.len() {
                return Err(Error::MalformedTrace(format!(
                    "step {t} has {} bits, expected {}",
                    s.len(),
                    vocab.len()
                )));
            }
            if !s.any_in(0..vocab.room_nodes()) {
                return Err(Error::MalformedTrace(format!("step {t} has no room or none bit")));
            }
        }
        Ok(SemanticTrace(steps))
    }

    pub fn steps(&self) -> &[SignalVector] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Bit-OR aggregate of a trace and the samples derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationBatch {
    #[serde(rename = "B")]
    pub bits: SignalVector,
    pub samples: Vec<Observation>,
}

/// Aggregate a window with bit-OR and emit reachability samples: jointly seen
/// room-graph pairs give `y = 1`; pairs with exactly one side seen give `y = 0`
/// (with [`NegativeRule::All`], unseen pairs also give `y = 0`). For each room
/// seen in the window, every object gives a containment sample `y = B(object)`.
pub fn extract_observations(
    vocab: &SignalVocabulary,
    trace: &SemanticTrace,
    negatives: NegativeRule,
) -> ObservationBatch {
    let bits = trace.steps().iter().copied().reduce(SignalVector::or).expect("non-empty trace");
    let n = vocab.room_nodes();
    let mut samples = Vec::new();
    for (i, j) in crate::signal::pairs(n) {
        let edge = Edge::unchecked(i, j);
        match (bits.get(i), bits.get(j)) {
            (true, true) => samples.push(Observation::new(edge, true)),
            (true, false) | (false, true) => samples.push(Observation::new(edge, false)),
            (false, false) => {
                if negatives == NegativeRule::All {
                    samples.push(Observation::new(edge, false));
                }
            }
        }
    }
    for room in (0..n).filter(|&r| bits.get(r)) {
        for o in 0..vocab.k_objects() {
            let obj = vocab.object_index(o);
            samples.push(Observation::new(Edge::unchecked(room, obj), bits.get(obj)));
        }
    }
    ObservationBatch { bits, samples }
}

/// A sequence of signals `tau_0 .. tau_m` ending at the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub tau: Vec<usize>,
    /// Product of edge beliefs along `tau`; 1 for an already-active goal.
    pub score: f64,
    pub sub_target: usize,
}

impl Plan {
    fn from_path(tau: Vec<usize>, score: f64) -> Plan {
        let sub_target = tau.get(1).copied().unwrap_or(tau[0]);
        Plan { tau, score, sub_target }
    }

    pub fn edges(&self) -> usize {
        self.tau.len() - 1
    }
}

#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    path: Vec<usize>,
}

/// Strict preference of `a` over `b`: lower cost, then fewer edges, then
/// lexicographically smaller path.
fn prefer(a: &Label, b: &Label) -> bool {
    let tol = COST_TIE * (1.0 + a.cost.max(b.cost));
    if a.cost < b.cost - tol {
        return true;
    }
    if a.cost > b.cost + tol {
        return false;
    }
    (a.path.len(), &a.path) < (b.path.len(), &b.path)
}

/// Best label to every room-graph node from the active set.
fn dijkstra(n: usize, sources: &[usize], belief: impl Fn(usize, usize) -> f64) -> Vec<Option<Label>> {
    let mut best: Vec<Option<Label>> = vec![None; n];
    let mut settled = vec![false; n];
    for &s in sources {
        best[s] = Some(Label { cost: 0.0, path: vec![s] });
    }
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if settled[v] {
                continue;
            }
            if let Some(lv) = &best[v] {
                if pick.is_none_or(|p| prefer(lv, best[p].as_ref().expect("picked has label"))) {
                    pick = Some(v);
                }
            }
        }
        let Some(u) = pick else { break };
        settled[u] = true;
        let lu = best[u].clone().expect("picked has label");
        for v in 0..n {
            if v == u || settled[v] {
                continue;
            }
            let mut path = lu.path.clone();
            path.push(v);
            let cand = Label {
                cost: lu.cost - belief(u, v).ln(),
                path,
            };
            if best[v].as_ref().is_none_or(|lv| prefer(&cand, lv)) {
                best[v] = Some(cand);
            }
        }
    }
    best
}

/// The plan maximizing the joint belief along the path from an active signal to `goal`.
///
/// Room goals use the reachability beliefs only. For an object goal the path
/// runs to the room signal `R` maximizing (path product) x `z_hat^o(R, goal)`
/// and ends with that containment hop.
pub fn best_plan(belief: &BeliefState, s_s: &SignalVector, goal: usize) -> Result<Plan> {
    let vocab = belief.vocab();
    vocab.check_index(goal)?;
    if s_s.len() != vocab.len() {
        return Err(Error::MalformedTrace(format!(
            "signal vector has {} bits, expected {}",
            s_s.len(),
            vocab.len()
        )));
    }
    if s_s.get(goal) {
        return Ok(Plan::from_path(vec![goal], 1.0));
    }
    let n = vocab.room_nodes();
    let active: Vec<usize> = (0..n).filter(|&i| s_s.get(i)).collect();
    if active.is_empty() {
        return Err(Error::MalformedTrace("no active room or none signal".into()));
    }
    let labels = dijkstra(n, &active, |i, j| belief.room(i, j));

    let (path, score) = if goal < n {
        let l = labels[goal].as_ref().expect("complete graph reaches every node");
        (l.path.clone(), path_score(belief, &l.path))
    } else {
        let object = goal - n;
        let mut best: Option<Label> = None;
        for (room, l) in labels.iter().enumerate() {
            let l = l.as_ref().expect("complete graph reaches every node");
            let mut path = l.path.clone();
            path.push(goal);
            let cand = Label {
                cost: l.cost - belief.containment(room, object).ln(),
                path,
            };
            if best.as_ref().is_none_or(|b| prefer(&cand, b)) {
                best = Some(cand);
            }
        }
        let path = best.expect("at least one room node").path;
        let score = path_score(belief, &path);
        (path, score)
    };
    Ok(Plan::from_path(path, score))
}

/// Product of beliefs along a signal path.
pub fn path_score(belief: &BeliefState, path: &[usize]) -> f64 {
    path.windows(2)
        .map(|w| belief.get(Edge::unchecked(w[0], w[1])))
        .product()
}

/// Whether to replan at primitive step `step`: on every multiple of
/// `interval`, or as soon as the current sub-target has been reached.
pub fn replan_schedule(step: u32, interval: u32, sub_target_reached: bool) -> bool {
    assert!(interval >= 1, "replan interval must be at least 1");
    sub_target_reached || step.is_multiple_of(interval)
}
