//! Supervised samples for an external learner: a random table-top scene,
//! a random arm configuration and the ground-truth grid labels for it.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clf::{velocity_control, ClfError};
use crate::config::Config;
use crate::geometry::vec6_serde;
use crate::kinematics::{JointConfig, Manipulator};
use crate::perception::{render_labels, GridLabels, GridSpec, LabelCell};
use crate::scene::{sample_initial_joints, sample_scene, Scene, SceneError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("sample count must be >= 1")]
    NoSamples,
    #[error("invalid dataset parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Near-target densification: with `boost_probability`, the sampled start
/// is moved along the Lyapunov flow toward a random target until a fraction
/// `s ~ U[boost_min, boost_max]` of its initial value has been shed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetParams {
    pub boost_probability: f64,
    pub boost_min: f64,
    pub boost_max: f64,
    pub flow_dt: f64,
    pub max_flow_steps: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self { boost_probability: 0.5, boost_min: 0.2, boost_max: 0.8, flow_dt: 1.0 / 60.0, max_flow_steps: 3000 }
    }
}

impl DatasetParams {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::BadParams(m.into()));
        if !(0.0..=1.0).contains(&self.boost_probability) {
            return bad("boost_probability must lie in [0, 1]");
        }
        if !(0.0 <= self.boost_min && self.boost_min <= self.boost_max && self.boost_max < 1.0) {
            return bad("need 0 <= boost_min <= boost_max < 1");
        }
        if !(self.flow_dt > 0.0 && self.flow_dt.is_finite()) {
            return bad("flow_dt must be > 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub seed: u64,
    pub index: u64,
    pub scene: Scene,
    #[serde(with = "vec6_serde")]
    pub theta: nalgebra::Vector6<f64>,
    pub grid: GridSpec,
    pub cells: Vec<LabelCell>,
}

impl DatasetSample {
    pub fn labels(&self) -> GridLabels {
        GridLabels { grid: self.grid, cells: self.cells.clone() }
    }
}

fn boost(cfg: &Config, scene: &Scene, q: JointConfig, rng: &mut impl Rng) -> Result<JointConfig, DatasetError> {
    let p = &cfg.dataset;
    let targets: Vec<_> = scene.targets().collect();
    if targets.is_empty() || !rng.random_bool(p.boost_probability) {
        return Ok(q);
    }
    let goals = targets[rng.random_range(0..targets.len())].goal_set();
    let shed = p.boost_min + (p.boost_max - p.boost_min) * rng.random::<f64>();
    let mut q = q;
    let first = velocity_control(&cfg.chain, &q, &goals, &cfg.clf, &cfg.solver)?;
    let stop = (1.0 - shed) * first.value;
    let mut out = first;
    for _ in 0..p.max_flow_steps {
        if out.value <= stop {
            break;
        }
        q = cfg.chain.clamp_to_limits(&JointConfig(q.0 + out.u.0 * p.flow_dt));
        out = velocity_control(&cfg.chain, &q, &goals, &cfg.clf, &cfg.solver)?;
    }
    Ok(q)
}

/// Sample `index` of the stream for `seed`; independent of every other index.
pub fn generate_sample(cfg: &Config, seed: u64, index: u64) -> Result<DatasetSample, DatasetError> {
    let mut rng = crate::derive_rng(seed, &[index]);
    let scene = sample_scene(&cfg.scene, &cfg.categories, &cfg.workspace, &cfg.camera, &mut rng)?;
    let q = sample_initial_joints(&cfg.chain, &cfg.workspace, &mut rng)?;
    let q = boost(cfg, &scene, q, &mut rng)?;
    let labels = render_labels(&scene, &cfg.chain, &q, &cfg.camera, &cfg.camera.grid(), &cfg.clf, &cfg.solver)?;
    Ok(DatasetSample { seed, index, scene, theta: q.0, grid: labels.grid, cells: labels.cells })
}

const CHUNK: u64 = 64;

/// Streams `n` samples as JSON lines in index order. Samples are built in
/// parallel chunks; the bytes do not depend on the thread count.
pub fn write_dataset(cfg: &Config, n: u64, seed: u64, out: &mut impl Write) -> Result<(), DatasetError> {
    if n == 0 {
        return Err(DatasetError::NoSamples);
    }
    cfg.dataset.validate()?;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let lines: Vec<String> = (start..end)
            .into_par_iter()
            .map(|i| generate_sample(cfg, seed, i).map(|s| serde_json::to_string(&s).expect("sample serializes")))
            .collect::<Result<_, _>>()?;
        for line in lines {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        start = end;
    }
    out.flush()?;
    Ok(())
}
