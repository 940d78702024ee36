//! The experiment configuration document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, AgentKind};
use crate::error::{Error, Result};
use crate::eval::EvalProtocol;
use crate::model::learn::{default_obs_grid, PriorSampling};
use crate::planner::NegativeRule;
use crate::world::{ExtractorNoise, GeneratorConfig, SubPolicyProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train: 200,
            valid: 20,
            test: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSettings {
    /// Exploration length per prior sample, in primitive steps.
    pub explore_steps: u32,
    pub samples_per_edge: u32,
    /// Primitive steps per room change under random exploration.
    pub random_steps_per_move: u32,
    /// Additive smoothing of the MLE.
    pub alpha: f64,
    /// Observation parameters written into a freshly fitted model.
    pub psi_obs_0: f64,
    pub psi_obs_1: f64,
}

impl Default for PriorSettings {
    fn default() -> Self {
        PriorSettings {
            explore_steps: 300,
            samples_per_edge: 50,
            random_steps_per_move: 100,
            alpha: 1.0,
            psi_obs_0: 0.001,
            psi_obs_1: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSettings {
    /// Validation episodes per candidate.
    pub episodes: usize,
    pub horizon: u32,
}

impl Default for TuneSettings {
    fn default() -> Self {
        TuneSettings {
            episodes: 1000,
            horizon: 1000,
        }
    }
}

/// Everything the pipeline needs, as one JSON document. Unlisted fields take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub splits: SplitSizes,
    pub subpolicy: SubPolicyProfile,
    pub noise: Option<ExtractorNoise>,
    /// `N`, in primitive steps.
    pub replan_interval: u32,
    pub negatives: NegativeRule,
    pub carry_belief: bool,
    pub prior: PriorSettings,
    pub psi_obs_grid: Vec<(f64, f64)>,
    pub tune: TuneSettings,
    pub protocol: EvalProtocol,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            generator: GeneratorConfig::default(),
            splits: SplitSizes::default(),
            subpolicy: SubPolicyProfile::default(),
            noise: None,
            replan_interval: 30,
            negatives: NegativeRule::Xor,
            carry_belief: false,
            prior: PriorSettings::default(),
            psi_obs_grid: default_obs_grid(),
            tune: TuneSettings::default(),
            protocol: EvalProtocol::default(),
        }
    }
}

/// Seed streams derived from the experiment seed.
pub mod streams {
    pub const CORPUS: u64 = 1;
    pub const PRIOR: u64 = 2;
    pub const TUNE: u64 = 3;
    pub const EVAL: u64 = 4;
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        let signals = self.generator.vocabulary()?.len();
        self.protocol.validate()?;
        if self.psi_obs_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for &(o0, o1) in &self.psi_obs_grid {
            for p in [o0, o1] {
                if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                    return Err(Error::config("psi_obs_grid", format!("{p} is not in [0, 1]")));
                }
            }
        }
        if self.prior.random_steps_per_move == 0 {
            return Err(Error::config("prior.random_steps_per_move", "must be at least 1"));
        }
        if self.prior.samples_per_edge == 0 {
            return Err(Error::config("prior.samples_per_edge", "must be at least 1"));
        }
        if self.splits.train == 0 {
            return Err(Error::config("splits.train", "must be at least 1"));
        }
        if self.tune.horizon == 0 {
            return Err(Error::config("tune.horizon", "must be positive"));
        }
        for &h in self.protocol.horizons.iter().chain([&self.tune.horizon]) {
            let mut a = self.agent(AgentKind::Leaps, h);
            a.noise = None;
            a.validate(signals).map_err(|e| match e {
                Error::InvalidConfig { field, reason } if field == "replan_interval" => {
                    Error::InvalidConfig { field, reason: format!("{reason} (horizon {h})") }
                }
                e => e,
            })?;
        }
        if let Some(noise) = &self.noise {
            noise.validate(signals)?;
        }
        for a in &self.protocol.agents {
            if let Some(noise) = &a.noise {
                noise.validate(signals)?;
            }
        }
        Ok(())
    }

    /// Agent settings shared by every evaluated agent.
    pub fn agent(&self, kind: AgentKind, horizon: u32) -> AgentConfig {
        AgentConfig {
            kind,
            replan_interval: self.replan_interval,
            horizon,
            subpolicy: self.subpolicy.clone(),
            noise: self.noise.clone(),
            negatives: self.negatives,
            carry_belief: self.carry_belief,
        }
    }

    pub fn prior_sampling(&self) -> PriorSampling {
        PriorSampling {
            explore_steps: self.prior.explore_steps,
            samples_per_edge: self.prior.samples_per_edge,
            steps_per_move: self.prior.random_steps_per_move,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
        let text = ExperimentConfig::default().to_json().unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_json(r#"{"protocol": {"stratum_flor": 3}}"#).unwrap_err();
        assert!(e.to_string().contains("protocol"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"subpolicy": {"p_adj": 1.5}}"#).unwrap_err();
        assert!(e.to_string().contains("p_adj"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"replan_interval": 25}"#).unwrap_err();
        assert!(e.to_string().contains("replan_interval"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"generator": {"room_count": "many"}}"#).unwrap_err();
        assert!(e.to_string().contains("generator.room_count"), "{e}");
    }
}
