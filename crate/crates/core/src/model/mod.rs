//! The latent reachability model `M(psi)`.
//!
//! Every unordered pair of room-graph signals carries a Bernoulli latent
//! `z` with prior `psi_prior`; each exploration window yields noisy
//! observations `y` of `z` through a shared two-parameter channel:
//! `P(y=1 | z=0) = psi_obs_0` and `P(y=0 | z=1) = psi_obs_1`.

mod belief;
pub mod learn;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use belief::{BeliefState, Edge, EdgeCounts, Observation, ObservationTally};

use crate::error::{Error, Result};
use crate::signal::{Grid, SignalVocabulary, SymMatrix};

/// Clamp applied to every stored probability so that `-ln p` stays finite.
pub const EPSILON: f64 = 1e-9;

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<f64> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::InvalidProbability {
            name,
            value: p,
            range: "[0, 1]",
        })
    }
}

/// `n * ln(p)` with the convention `0 * ln(0) = 0`.
fn xlogy(n: u64, p: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * p.ln()
    }
}

/// Closed-form posterior `P(z=1 | n_pos ones, n_neg zeros)` under the
/// observation channel, evaluated in log space and clamped to `[EPSILON, 1-EPSILON]`.
pub fn posterior_edge(prior: f64, n_pos: u64, n_neg: u64, psi_obs_0: f64, psi_obs_1: f64) -> Result<f64> {
    if !(prior.is_finite() && prior > 0.0 && prior < 1.0) {
        return Err(Error::InvalidProbability {
            name: "prior",
            value: prior,
            range: "(0, 1)",
        });
    }
    check_probability("psi_obs_0", psi_obs_0)?;
    check_probability("psi_obs_1", psi_obs_1)?;

    let log_on = prior.ln() + xlogy(n_pos, 1.0 - psi_obs_1) + xlogy(n_neg, psi_obs_1);
    let log_off = (1.0 - prior).ln() + xlogy(n_pos, psi_obs_0) + xlogy(n_neg, 1.0 - psi_obs_0);
    let p = match (log_on == f64::NEG_INFINITY, log_off == f64::NEG_INFINITY) {
        (true, true) => prior,
        (true, false) => 0.0,
        (false, true) => 1.0,
        (false, false) => 1.0 / (1.0 + (log_off - log_on).exp()),
    };
    Ok(clamp_probability(p))
}

/// Parameters `psi` plus the signal vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticModel {
    vocab: SignalVocabulary,
    psi_prior: SymMatrix<f64>,
    psi_obs_0: f64,
    psi_obs_1: f64,
    psi_obj_prior: Option<Grid<f64>>,
    /// Per-edge `(psi_obs_0, psi_obs_1)` overriding the shared pair. Off by default.
    edge_obs: Option<SymMatrix<(f64, f64)>>,
}

impl SemanticModel {
    pub fn new(vocab: SignalVocabulary, psi_prior: SymMatrix<f64>, psi_obs_0: f64, psi_obs_1: f64) -> Result<Self> {
        if psi_prior.n() != vocab.room_nodes() {
            return Err(Error::config(
                "psi_prior",
                format!(
                    "expected {} room-graph nodes, got {}",
                    vocab.room_nodes(),
                    psi_prior.n()
                ),
            ));
        }
        let clamped: Vec<f64> = psi_prior
            .upper()
            .iter()
            .map(|&p| check_probability("psi_prior", p).map(clamp_probability))
            .collect::<Result<_>>()?;
        let n = psi_prior.n();
        // Containment priors start uninformed until fitted ones are attached.
        let psi_obj_prior = (vocab.k_objects() > 0).then(|| Grid::filled(n, vocab.k_objects(), 0.5));
        Ok(SemanticModel {
            vocab,
            psi_prior: SymMatrix::from_upper(n, clamped).expect("same shape"),
            psi_obs_0: clamp_probability(check_probability("psi_obs_0", psi_obs_0)?),
            psi_obs_1: clamp_probability(check_probability("psi_obs_1", psi_obs_1)?),
            psi_obj_prior,
            edge_obs: None,
        })
    }

    /// A model with every room-graph prior set to `prior`.
    pub fn uniform(vocab: SignalVocabulary, prior: f64, psi_obs_0: f64, psi_obs_1: f64) -> Result<Self> {
        let n = vocab.room_nodes();
        let mut m = Self::new(vocab, SymMatrix::filled(n, prior), psi_obs_0, psi_obs_1)?;
        if m.vocab.k_objects() > 0 {
            let grid = Grid::filled(n, m.vocab.k_objects(), prior);
            m = m.with_object_prior(grid)?;
        }
        Ok(m)
    }

    /// Attach containment priors, a `(K+1) x K_o` matrix.
    pub fn with_object_prior(mut self, prior: Grid<f64>) -> Result<Self> {
        if prior.rows() != self.vocab.room_nodes() || prior.cols() != self.vocab.k_objects() {
            return Err(Error::config(
                "psi_obj_prior",
                format!(
                    "expected {}x{} matrix, got {}x{}",
                    self.vocab.room_nodes(),
                    self.vocab.k_objects(),
                    prior.rows(),
                    prior.cols()
                ),
            ));
        }
        let mut g = prior;
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                let p = check_probability("psi_obj_prior", g.get(r, c))?;
                g.set(r, c, clamp_probability(p));
            }
        }
        self.psi_obj_prior = Some(g);
        Ok(self)
    }

    pub fn with_edge_noise(mut self, noise: SymMatrix<(f64, f64)>) -> Result<Self> {
        if noise.n() != self.vocab.room_nodes() {
            return Err(Error::config("psi_obs_edges", "shape does not match the room graph"));
        }
        let data = noise
            .upper()
            .iter()
            .map(|&(a, b)| {
                Ok((
                    clamp_probability(check_probability("psi_obs_edges", a)?),
                    clamp_probability(check_probability("psi_obs_edges", b)?),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        self.edge_obs = Some(SymMatrix::from_upper(noise.n(), data).expect("same shape"));
        Ok(self)
    }

    pub fn with_obs(&self, psi_obs_0: f64, psi_obs_1: f64) -> Result<Self> {
        let mut m = self.clone();
        m.psi_obs_0 = clamp_probability(check_probability("psi_obs_0", psi_obs_0)?);
        m.psi_obs_1 = clamp_probability(check_probability("psi_obs_1", psi_obs_1)?);
        Ok(m)
    }

    pub fn vocab(&self) -> &SignalVocabulary {
        &self.vocab
    }

    pub fn psi_prior(&self) -> &SymMatrix<f64> {
        &self.psi_prior
    }

    pub fn prior(&self, i: usize, j: usize) -> f64 {
        self.psi_prior.get(i, j)
    }

    pub fn object_prior(&self) -> Option<&Grid<f64>> {
        self.psi_obj_prior.as_ref()
    }

    pub fn psi_obs(&self) -> (f64, f64) {
        (self.psi_obs_0, self.psi_obs_1)
    }

    /// Observation channel for a room-graph edge.
    pub fn edge_obs(&self, i: usize, j: usize) -> (f64, f64) {
        match &self.edge_obs {
            Some(m) => m.get(i, j),
            None => (self.psi_obs_0, self.psi_obs_1),
        }
    }

    /// Number of free parameters: `(K+1)K/2` priors, the observation
    /// channel (2 shared values, or 2 per edge), and containment priors.
    pub fn parameter_count(&self) -> usize {
        let priors = self.psi_prior.upper().len();
        let obs = match &self.edge_obs {
            Some(m) => 2 * m.upper().len(),
            None => 2,
        };
        let objects = self.psi_obj_prior.as_ref().map_or(0, |g| g.rows() * g.cols());
        priors + obs + objects
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&ModelFile::from(self))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// On-disk model document.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    vocab: SignalVocabulary,
    /// Upper triangle of the `(K+1)x(K+1)` prior matrix, row-major.
    psi_prior: Vec<f64>,
    psi_obs_0: f64,
    psi_obs_1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi_obj_prior: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi_obs_edges: Option<Vec<[f64; 2]>>,
}

impl From<&SemanticModel> for ModelFile {
    fn from(m: &SemanticModel) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            vocab: m.vocab.clone(),
            psi_prior: m.psi_prior.upper().to_vec(),
            psi_obs_0: m.psi_obs_0,
            psi_obs_1: m.psi_obs_1,
            psi_obj_prior: m.psi_obj_prior.as_ref().map(Grid::to_rows),
            psi_obs_edges: m
                .edge_obs
                .as_ref()
                .map(|e| e.upper().iter().map(|&(a, b)| [a, b]).collect()),
        }
    }
}

impl TryFrom<ModelFile> for SemanticModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        if f.version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(f.version));
        }
        let n = f.vocab.room_nodes();
        let prior = SymMatrix::from_upper(n, f.psi_prior).ok_or_else(|| {
            Error::config("psi_prior", format!("expected {} entries", n * (n - 1) / 2))
        })?;
        let mut m = SemanticModel::new(f.vocab, prior, f.psi_obs_0, f.psi_obs_1)?;
        if let Some(rows) = f.psi_obj_prior {
            let g = Grid::from_rows(&rows)
                .ok_or_else(|| Error::config("psi_obj_prior", "ragged matrix"))?;
            m = m.with_object_prior(g)?;
        } else if m.vocab.k_objects() > 0 {
            return Err(Error::config("psi_obj_prior", "required when the vocabulary has objects"));
        }
        if let Some(edges) = f.psi_obs_edges {
            let e = SymMatrix::from_upper(n, edges.into_iter().map(|[a, b]| (a, b)).collect())
                .ok_or_else(|| Error::config("psi_obs_edges", "wrong number of entries"))?;
            m = m.with_edge_noise(e)?;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_evidence_returns_prior() {
        assert_eq!(posterior_edge(0.5, 0, 0, 0.001, 0.15).unwrap(), 0.5);
        assert!((posterior_edge(0.27, 0, 0, 0.2, 0.3).unwrap() - 0.27).abs() < 1e-15);
    }

    #[test]
    fn single_positive_and_negative_samples() {
        let pos = posterior_edge(0.5, 1, 0, 0.001, 0.15).unwrap();
        assert!((pos - 0.85 / 0.851).abs() < 1e-12);
        assert!((pos - 0.998825).abs() < 1e-6);
        let neg = posterior_edge(0.5, 0, 1, 0.001, 0.15).unwrap();
        assert!((neg - 0.15 / 1.149).abs() < 1e-12);
        assert!((neg - 0.130548).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(posterior_edge(0.0, 0, 0, 0.1, 0.1).is_err());
        assert!(posterior_edge(1.0, 0, 0, 0.1, 0.1).is_err());
        assert!(posterior_edge(f64::NAN, 0, 0, 0.1, 0.1).is_err());
        assert!(posterior_edge(0.5, 0, 0, -0.1, 0.1).is_err());
        assert!(posterior_edge(0.5, 0, 0, 0.1, f64::INFINITY).is_err());
    }

    #[test]
    fn degenerate_channel_is_clamped() {
        // A noiseless channel makes one positive sample decisive.
        let p = posterior_edge(0.3, 1, 0, 0.0, 0.0).unwrap();
        assert_eq!(p, 1.0 - EPSILON);
        let p = posterior_edge(0.3, 0, 1, 0.0, 0.0).unwrap();
        assert_eq!(p, EPSILON);
        // Contradictory evidence under a noiseless channel keeps the prior.
        let p = posterior_edge(0.3, 1, 1, 0.0, 0.0).unwrap();
        assert_eq!(p, 0.3);
    }

    #[test]
    fn roomnav_model_has_38_parameters() {
        let m = SemanticModel::uniform(SignalVocabulary::roomnav(), 0.5, 0.001, 0.15).unwrap();
        assert_eq!(m.psi_prior().upper().len(), 36);
        assert_eq!(m.parameter_count(), 38);
    }

    #[test]
    fn stored_probabilities_are_clamped() {
        let v = SignalVocabulary::roomnav();
        let m = SemanticModel::uniform(v.clone(), 1.0, 0.0, 1.0).unwrap();
        assert_eq!(m.prior(0, 1), 1.0 - EPSILON);
        assert_eq!(m.psi_obs(), (EPSILON, 1.0 - EPSILON));
        assert!(SemanticModel::uniform(v, 1.5, 0.0, 0.1).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let v = SignalVocabulary::roomnav();
        let n = v.room_nodes();
        let vals: Vec<f64> = (0..n * (n - 1) / 2).map(|i| (i as f64 * 0.1234567891).fract().max(0.01)).collect();
        let m = SemanticModel::new(v, SymMatrix::from_upper(n, vals).unwrap(), 0.001, 0.15).unwrap();
        let s = m.to_json().unwrap();
        let back = SemanticModel::from_json(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), s);
    }

    #[test]
    fn json_rejects_wrong_shape_and_version() {
        let m = SemanticModel::uniform(SignalVocabulary::roomnav(), 0.5, 0.001, 0.15).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        doc["version"] = 2.into();
        assert!(matches!(
            SemanticModel::from_json(&doc.to_string()),
            Err(Error::UnsupportedVersion(2))
        ));
        doc["version"] = 1.into();
        doc["psi_prior"].as_array_mut().unwrap().pop();
        assert!(SemanticModel::from_json(&doc.to_string()).is_err());
    }
}
