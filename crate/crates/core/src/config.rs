//! Single JSON configuration shared by every command. Missing fields take
//! their defaults; unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbitration::ArbitratorState;
use crate::clf::ClfParams;
use crate::dataset::DatasetParams;
use crate::kinematics::{KinematicChain, SolverParams};
use crate::perception::CameraModel;
use crate::scene::{sample_initial_joints, sample_scene, ObjectCategory, PerturbationEvent, SceneConfig, Workspace};
use crate::simulator::{EpisodeConfig, EpisodeSampler, EpisodeSetup, ProposalSource, SimError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchParams {
    pub categories: Vec<String>,
    pub instance_counts: Vec<usize>,
}

impl Default for BatchParams {
    fn default() -> Self {
        Self { categories: vec!["mug".into(), "table_leg".into(), "spam".into()], instance_counts: vec![1, 2, 3, 4] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub chain: KinematicChain,
    pub camera: CameraModel,
    pub workspace: Workspace,
    pub categories: Vec<ObjectCategory>,
    pub scene: SceneConfig,
    pub clf: ClfParams,
    pub solver: SolverParams,
    pub arbitrator: ArbitratorState,
    pub source: ProposalSource,
    pub dt: f64,
    pub max_time: f64,
    pub schedule: Vec<PerturbationEvent>,
    pub dataset: DatasetParams,
    pub batch: BatchParams,
}

impl Default for Config {
    fn default() -> Self {
        let ep = EpisodeConfig::default();
        Self {
            chain: ep.chain,
            camera: ep.camera,
            workspace: Workspace::default(),
            categories: ObjectCategory::defaults(),
            scene: SceneConfig::default(),
            clf: ep.clf,
            solver: ep.solver,
            arbitrator: ep.arbitrator,
            source: ep.source,
            dt: ep.dt,
            max_time: ep.max_time,
            schedule: ep.schedule,
            dataset: DatasetParams::default(),
            batch: BatchParams::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.episode().validate().map_err(|e| invalid(&e))?;
        self.workspace.validate().map_err(|e| invalid(&e))?;
        if self.categories.is_empty() {
            return Err(ConfigError::Invalid("no object categories".into()));
        }
        for c in &self.categories {
            c.validate().map_err(|e| invalid(&e))?;
        }
        for name in std::iter::once(&self.scene.category).chain(&self.batch.categories) {
            self.category(name)?;
        }
        if self.scene.min_targets == 0 || self.scene.max_targets < self.scene.min_targets {
            return Err(ConfigError::Invalid("target counts must satisfy 1 <= min <= max".into()));
        }
        self.dataset.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn category(&self, name: &str) -> Result<&ObjectCategory, ConfigError> {
        self.categories
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown category {name:?}")))
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            chain: self.chain.clone(),
            camera: self.camera,
            clf: self.clf,
            solver: self.solver,
            arbitrator: self.arbitrator.reset(),
            source: self.source,
            dt: self.dt,
            max_time: self.max_time,
            schedule: self.schedule.clone(),
        }
    }

    /// Scene and start configuration drawn from `scene`, all randomness
    /// derived from `seed`.
    pub fn sample_setup(&self, scene: &SceneConfig, seed: u64) -> Result<EpisodeSetup, SimError> {
        let mut rng = crate::derive_rng(seed, &[1]);
        let scene = sample_scene(scene, &self.categories, &self.workspace, &self.camera, &mut rng)?;
        let initial_joints = sample_initial_joints(&self.chain, &self.workspace, &mut rng)?;
        Ok(EpisodeSetup { scene, initial_joints, seed: crate::derive_seed(seed, &[2]) })
    }
}

impl EpisodeSampler for Config {
    fn sample(&self, category: &str, instances: usize, seed: u64) -> Result<EpisodeSetup, SimError> {
        let scene = SceneConfig {
            category: category.to_string(),
            min_targets: instances,
            max_targets: instances,
            max_distractors: self.scene.max_distractors,
        };
        self.sample_setup(&scene, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(Config::from_json("{}").unwrap(), Config::default());
    }

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_json(&c.to_json_pretty()).unwrap(), c);
    }

    #[test]
    fn shipped_default_file_matches_defaults() {
        let shipped = include_str!("../data/default_config.json");
        assert_eq!(Config::from_json(shipped).unwrap(), Config::default());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(matches!(Config::from_json(r#"{"bogus": 1}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(Config::from_json(r#"{"dt": -1}"#), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::from_json(r#"{"scene": {"category": "teapot"}}"#), Err(ConfigError::Invalid(_))));
        assert!(Config::from_json(r#"{"clf": {"k": 0}}"#).is_err());
    }

    #[test]
    fn sampling_is_a_function_of_the_seed() {
        let c = Config::default();
        let a = c.sample("mug", 2, 9).unwrap();
        assert_eq!(a, c.sample("mug", 2, 9).unwrap());
        assert_ne!(a, c.sample("mug", 2, 10).unwrap());
        assert_eq!(a.scene.targets().count(), 2);
    }
}
