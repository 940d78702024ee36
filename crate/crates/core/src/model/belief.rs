use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{posterior_edge, SemanticModel};
use crate::error::{Error, Result};
use crate::signal::{Grid, SignalVocabulary, SymMatrix};

/// An unordered model edge between two signal indices, stored with `a < b`.
///
/// Either both endpoints are room-graph nodes (a reachability edge), or `a`
/// is a room-graph node and `b` an object signal (a containment edge).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct Edge {
    a: usize,
    b: usize,
}

impl TryFrom<[usize; 2]> for Edge {
    type Error = Error;
    fn try_from([a, b]: [usize; 2]) -> Result<Self> {
        if a == b {
            return Err(Error::SelfEdge(a));
        }
        Ok(Edge {
            a: a.min(b),
            b: a.max(b),
        })
    }
}

impl From<Edge> for [usize; 2] {
    fn from(e: Edge) -> Self {
        [e.a, e.b]
    }
}

impl Edge {
    /// Validated edge between signal indices `i` and `j`.
    pub fn new(vocab: &SignalVocabulary, i: usize, j: usize) -> Result<Edge> {
        vocab.check_index(i)?;
        vocab.check_index(j)?;
        let e = Edge::try_from([i, j])?;
        if !vocab.is_room_node(e.a) {
            return Err(Error::InvalidEdge { a: e.a, b: e.b });
        }
        Ok(e)
    }

    /// Edge without vocabulary checks; callers guarantee validity.
    pub(crate) fn unchecked(i: usize, j: usize) -> Edge {
        debug_assert_ne!(i, j);
        Edge {
            a: i.min(j),
            b: i.max(j),
        }
    }

    pub fn endpoints(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn is_containment(&self, vocab: &SignalVocabulary) -> bool {
        vocab.is_object(self.b)
    }
}

/// One sample `y` of an edge's latent reachability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub edge: Edge,
    pub y: bool,
}

impl Observation {
    pub fn new(edge: Edge, y: bool) -> Self {
        Observation { edge, y }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub n_pos: u64,
    pub n_neg: u64,
}

impl EdgeCounts {
    pub fn add(&mut self, y: bool) {
        if y {
            self.n_pos += 1;
        } else {
            self.n_neg += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.n_pos + self.n_neg
    }
}

/// Accumulated observations `Y`, one count pair per unordered edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTally {
    rooms: SymMatrix<EdgeCounts>,
    objects: Grid<EdgeCounts>,
}

impl ObservationTally {
    pub fn new(vocab: &SignalVocabulary) -> Self {
        ObservationTally {
            rooms: SymMatrix::filled(vocab.room_nodes(), EdgeCounts::default()),
            objects: Grid::filled(vocab.room_nodes(), vocab.k_objects(), EdgeCounts::default()),
        }
    }

    pub fn room_nodes(&self) -> usize {
        self.rooms.n()
    }

    pub fn get(&self, edge: Edge) -> EdgeCounts {
        let (a, b) = edge.endpoints();
        if b < self.rooms.n() {
            self.rooms.get(a, b)
        } else {
            self.objects.get(a, b - self.rooms.n())
        }
    }

    pub fn get_mut(&mut self, edge: Edge) -> &mut EdgeCounts {
        let (a, b) = edge.endpoints();
        let n = self.rooms.n();
        if b < n {
            self.rooms.get_mut(a, b)
        } else {
            self.objects.get_mut(a, b - n)
        }
    }

    pub fn record(&mut self, edge: Edge, y: bool) {
        self.get_mut(edge).add(y);
    }

    pub fn room(&self, i: usize, j: usize) -> EdgeCounts {
        self.rooms.get(i, j)
    }

    pub fn containment(&self, room: usize, object: usize) -> EdgeCounts {
        self.objects.get(room, object)
    }

    pub fn merge(&mut self, other: &ObservationTally) {
        for (i, j) in crate::signal::pairs(self.rooms.n()) {
            let o = other.rooms.get(i, j);
            let m = self.rooms.get_mut(i, j);
            m.n_pos += o.n_pos;
            m.n_neg += o.n_neg;
        }
        for r in 0..self.objects.rows() {
            for c in 0..self.objects.cols() {
                let o = other.objects.get(r, c);
                let m = self.objects.get_mut(r, c);
                m.n_pos += o.n_pos;
                m.n_neg += o.n_neg;
            }
        }
    }
}

/// Posterior beliefs `z_hat` given the model prior and the tally so far.
#[derive(Debug, Clone)]
pub struct BeliefState {
    model: Arc<SemanticModel>,
    tally: ObservationTally,
    rooms: SymMatrix<f64>,
    objects: Option<Grid<f64>>,
}

impl BeliefState {
    pub fn new(model: Arc<SemanticModel>) -> Self {
        let tally = ObservationTally::new(model.vocab());
        let rooms = model.psi_prior().clone();
        let objects = model.object_prior().cloned();
        BeliefState {
            model,
            tally,
            rooms,
            objects,
        }
    }

    pub fn model(&self) -> &Arc<SemanticModel> {
        &self.model
    }

    pub fn vocab(&self) -> &SignalVocabulary {
        self.model.vocab()
    }

    pub fn tally(&self) -> &ObservationTally {
        &self.tally
    }

    /// `z_hat(i, j)` for two room-graph nodes.
    pub fn room(&self, i: usize, j: usize) -> f64 {
        self.rooms.get(i, j)
    }

    /// `z_hat^o(room, object)`, object given as its ordinal `0..K_o`.
    pub fn containment(&self, room: usize, object: usize) -> f64 {
        self.objects
            .as_ref()
            .map_or(super::EPSILON, |g| g.get(room, object))
    }

    pub fn get(&self, edge: Edge) -> f64 {
        let (a, b) = edge.endpoints();
        let n = self.rooms.n();
        if b < n {
            self.room(a, b)
        } else {
            self.containment(a, b - n)
        }
    }

    pub fn room_matrix(&self) -> &SymMatrix<f64> {
        &self.rooms
    }

    /// Record new `(edge, y)` samples and recompute the touched beliefs.
    ///
    /// The whole batch is validated before anything is applied.
    pub fn update(&mut self, samples: &[Observation]) -> Result<()> {
        let vocab = self.model.vocab();
        for o in samples {
            let (a, b) = o.edge.endpoints();
            Edge::new(vocab, a, b)?;
        }
        for o in samples {
            self.tally.record(o.edge, o.y);
        }
        let mut touched: Vec<Edge> = samples.iter().map(|o| o.edge).collect();
        touched.sort_unstable();
        touched.dedup();
        let n = self.rooms.n();
        for e in touched {
            let (a, b) = e.endpoints();
            let c = self.tally.get(e);
            if b < n {
                let (o0, o1) = self.model.edge_obs(a, b);
                let p = posterior_edge(self.model.prior(a, b), c.n_pos, c.n_neg, o0, o1)?;
                self.rooms.set(a, b, p);
            } else {
                let (o0, o1) = self.model.psi_obs();
                let prior = self
                    .model
                    .object_prior()
                    .map_or(0.5, |g| g.get(a, b - n));
                let p = posterior_edge(prior, c.n_pos, c.n_neg, o0, o1)?;
                if let Some(g) = self.objects.as_mut() {
                    g.set(a, b - n, p);
                }
            }
        }
        Ok(())
    }

    /// Short hex digest of every belief entry's bit pattern.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in self.rooms.upper() {
            h.update(p.to_bits().to_le_bytes());
        }
        if let Some(g) = &self.objects {
            for p in g.as_slice() {
                h.update(p.to_bits().to_le_bytes());
            }
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EPSILON;

    fn state() -> BeliefState {
        let m = SemanticModel::uniform(SignalVocabulary::roomnav(), 0.5, 0.001, 0.15).unwrap();
        BeliefState::new(Arc::new(m))
    }

    #[test]
    fn empty_tally_reproduces_prior() {
        let s = state();
        for (i, j) in crate::signal::pairs(9) {
            assert_eq!(s.room(i, j), s.model().prior(i, j));
        }
    }

    #[test]
    fn empty_update_is_a_no_op() {
        let mut s = state();
        let before = s.digest();
        s.update(&[]).unwrap();
        assert_eq!(s.digest(), before);
    }

    #[test]
    fn one_positive_updates_both_orientations() {
        let mut s = state();
        let e = Edge::new(s.vocab(), 4, 2).unwrap();
        s.update(&[Observation::new(e, true)]).unwrap();
        let expect = posterior_edge(0.5, 1, 0, 0.001, 0.15).unwrap();
        assert_eq!(s.room(2, 4), expect);
        assert_eq!(s.room(4, 2), expect);
        assert_eq!(s.room(0, 1), 0.5);
    }

    #[test]
    fn batches_are_exchangeable() {
        let mut a = state();
        let mut b = state();
        let e = Edge::new(a.vocab(), 0, 1).unwrap();
        a.update(&[Observation::new(e, true)]).unwrap();
        a.update(&[Observation::new(e, false)]).unwrap();
        b.update(&[Observation::new(e, false), Observation::new(e, true)]).unwrap();
        assert_eq!(a.room(0, 1), b.room(0, 1));
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn rejects_unknown_and_self_edges() {
        let s = state();
        assert!(matches!(Edge::new(s.vocab(), 3, 3), Err(Error::SelfEdge(3))));
        assert!(matches!(Edge::new(s.vocab(), 0, 9), Err(Error::UnknownSignal { .. })));
    }

    #[test]
    fn invalid_batch_leaves_state_untouched() {
        let mut s = state();
        let good = Edge::new(s.vocab(), 0, 1).unwrap();
        let bad = Edge::unchecked(0, 40);
        assert!(s.update(&[Observation::new(good, true), Observation::new(bad, true)]).is_err());
        assert_eq!(s.tally().room(0, 1), EdgeCounts::default());
    }

    #[test]
    fn beliefs_stay_clamped_under_long_evidence() {
        let mut s = state();
        let e = Edge::new(s.vocab(), 0, 1).unwrap();
        s.update(&vec![Observation::new(e, false); 500]).unwrap();
        assert_eq!(s.room(0, 1), EPSILON);
    }

    #[test]
    fn containment_edges_use_object_prior() {
        let v = SignalVocabulary::new(
            vec!["a".into(), "b".into()],
            "none".into(),
            vec!["chair".into()],
        )
        .unwrap();
        let m = SemanticModel::uniform(v.clone(), 0.3, 0.01, 0.1).unwrap();
        let mut s = BeliefState::new(Arc::new(m));
        let e = Edge::new(&v, 3, 1).unwrap();
        assert!(e.is_containment(&v));
        s.update(&[Observation::new(e, true)]).unwrap();
        assert_eq!(s.containment(1, 0), posterior_edge(0.3, 1, 0, 0.01, 0.1).unwrap());
        // Object-object pairs are not model edges.
        let v2 = SignalVocabulary::new(
            vec!["a".into(), "b".into()],
            "none".into(),
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        assert!(matches!(Edge::new(&v2, 3, 4), Err(Error::InvalidEdge { .. })));
    }
}
