//! Closed-loop episode engine.
//!
//! Each step renders ground-truth labels for the current joint angles,
//! turns them into proposals (exact or noisy), selects the minimal-`V̂`
//! cell, filters its control with momentum and integrates the joints with
//! explicit Euler at the camera rate.

use std::io::{BufRead, Write};

use nalgebra::Vector6;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbitration::{momentum_update, select, should_grasp, ArbitratorState};
use crate::clf::{clf_value, resolve_goal, ClfError, ClfParams};
use crate::geometry::vec6_serde;
use crate::kinematics::{JointConfig, KinematicChain, Manipulator, SolverParams};
use crate::perception::{
    noisy_proposals, oracle_proposals, render_labels_detailed, CameraModel, GridLabels, GridSpec, NoiseParams,
    ProposalGrid,
};
use crate::scene::{apply_event, PerturbationEvent, Scene, SceneError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite numerics at t = {t}")]
    Fault { t: f64 },
    #[error("invalid episode configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed trajectory log line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

/// Where per-cell proposals come from.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalSource {
    #[default]
    Oracle,
    Noisy(NoiseParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub chain: KinematicChain,
    pub camera: CameraModel,
    pub clf: ClfParams,
    pub solver: SolverParams,
    pub arbitrator: ArbitratorState,
    pub source: ProposalSource,
    pub dt: f64,
    pub max_time: f64,
    pub schedule: Vec<PerturbationEvent>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            chain: KinematicChain::ur5(),
            camera: CameraModel::default(),
            clf: ClfParams::default(),
            solver: SolverParams::default(),
            arbitrator: ArbitratorState::default(),
            source: ProposalSource::Oracle,
            dt: 1.0 / 60.0,
            max_time: 30.0,
            schedule: Vec::new(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.max_time > self.dt) {
            return bad(format!("max_time must exceed dt, got {}", self.max_time));
        }
        if self.schedule.iter().any(|e| !(e.time >= 0.0)) {
            return bad("event times must be >= 0".into());
        }
        self.arbitrator.validate().map_err(|e| SimError::Config(e.to_string()))?;
        self.camera.validate().map_err(|e| SimError::Config(e.to_string()))?;
        self.clf.validate()?;
        if let ProposalSource::Noisy(n) = &self.source {
            n.validate().map_err(|e| SimError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// One control tick. `v_true` is the ground-truth value of the instance that
/// owns the selected cell, or the smallest over all targets when nothing
/// (or a false positive) was selected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    #[serde(with = "vec6_serde")]
    pub theta: Vector6<f64>,
    pub cell: Option<(u32, u32)>,
    pub v_hat_min: Option<f64>,
    #[serde(with = "opt_vec6")]
    pub u_hat: Option<Vector6<f64>>,
    #[serde(with = "opt_vec6")]
    pub u_bar: Option<Vector6<f64>>,
    pub v_true: Option<f64>,
    pub instance: Option<u32>,
}

mod opt_vec6 {
    use nalgebra::Vector6;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vector6<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|v| -> [f64; 6] { std::array::from_fn(|i| v[i]) }).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vector6<f64>>, D::Error> {
        Ok(Option::<[f64; 6]>::deserialize(d)?.map(Vector6::from))
    }
}

pub type TrajectoryLog = Vec<StepRecord>;

pub fn write_log(log: &[StepRecord], out: &mut impl Write) -> std::io::Result<()> {
    for rec in log {
        serde_json::to_writer(&mut *out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log(input: impl BufRead) -> Result<TrajectoryLog, SimError> {
    let mut log = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        log.push(serde_json::from_str(&line).map_err(|source| SimError::Parse { line: i + 1, source })?);
    }
    Ok(log)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    Converged,
    Timeout,
    Fault,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    pub reason: EndReason,
    pub time_to_grasp: Option<f64>,
    pub final_position_error: Option<f64>,
    pub target_instance: Option<u32>,
}

/// Scene, start configuration and noise seed of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub scene: Scene,
    pub initial_joints: JointConfig,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Grasp {
    t: f64,
    instance: Option<u32>,
}

/// Running state of one closed-loop episode.
pub struct Episode<'a> {
    cfg: &'a EpisodeConfig,
    grid: GridSpec,
    scene: Scene,
    q: JointConfig,
    arb: ArbitratorState,
    steps: u64,
    schedule: Vec<PerturbationEvent>,
    next_event: usize,
    rng: ChaCha8Rng,
    grasp: Option<Grasp>,
}

impl<'a> Episode<'a> {
    pub fn new(cfg: &'a EpisodeConfig, setup: &EpisodeSetup) -> Result<Self, SimError> {
        cfg.validate()?;
        cfg.chain.check_limits(&setup.initial_joints).map_err(ClfError::from)?;
        let mut schedule = cfg.schedule.clone();
        schedule.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self {
            cfg,
            grid: cfg.camera.grid(),
            scene: setup.scene.clone(),
            q: setup.initial_joints,
            arb: cfg.arbitrator.reset(),
            steps: 0,
            schedule,
            next_event: 0,
            rng: crate::derive_rng(setup.seed, &[0x5eed]),
            grasp: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dt
    }

    pub fn joints(&self) -> &JointConfig {
        &self.q
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn arbitrator(&self) -> &ArbitratorState {
        &self.arb
    }

    pub fn grasped(&self) -> bool {
        self.grasp.is_some()
    }

    fn apply_due_events(&mut self, t: f64) -> Result<(), SimError> {
        while let Some(ev) = self.schedule.get(self.next_event) {
            if ev.time > t + 1e-9 {
                break;
            }
            self.scene = apply_event(&self.scene, ev)?;
            self.next_event += 1;
        }
        Ok(())
    }

    /// Observe, select, filter and integrate once. When the selected value
    /// falls below the grasp threshold the arm stays put and the episode is
    /// marked as grasped.
    pub fn step(&mut self) -> Result<StepRecord, SimError> {
        let source = self.cfg.source;
        self.step_with(|labels, rng| match &source {
            ProposalSource::Oracle => oracle_proposals(labels),
            ProposalSource::Noisy(n) => noisy_proposals(labels, n, rng),
        })
    }

    /// [`Episode::step`] with proposals built by `propose` from the
    /// ground-truth labels instead of the configured source.
    pub fn step_with<F>(&mut self, propose: F) -> Result<StepRecord, SimError>
    where
        F: FnOnce(&GridLabels, &mut ChaCha8Rng) -> ProposalGrid,
    {
        let cfg = self.cfg;
        let t = self.time();
        self.apply_due_events(t)?;

        let rendered =
            render_labels_detailed(&self.scene, &cfg.chain, &self.q, &cfg.camera, &self.grid, &cfg.clf, &cfg.solver)?;
        let props = propose(&rendered.labels, &mut self.rng);
        let sel = select(&props, self.arb.score_threshold);
        let instance = sel.and_then(|s| rendered.labels.owner_of(s.cell.0, s.cell.1));

        let v_true = match instance {
            Some(id) => Some(rendered.controls[&id].value),
            None => self.min_true_value()?,
        };

        let theta = self.q.0;
        if let Some(s) = &sel {
            if should_grasp(s.v_hat, self.arb.grasp_threshold) {
                self.grasp = Some(Grasp { t, instance });
            } else {
                let (arb, u_bar) = momentum_update(&self.arb, &s.u_hat);
                self.arb = arb;
                let next = JointConfig(self.q.0 + u_bar * cfg.dt);
                if !next.0.iter().all(|x| x.is_finite()) {
                    return Err(SimError::Fault { t });
                }
                self.q = cfg.chain.clamp_to_limits(&next);
            }
        }
        self.steps += 1;

        let rec = StepRecord {
            t,
            theta,
            cell: sel.map(|s| s.cell),
            v_hat_min: sel.map(|s| s.v_hat),
            u_hat: sel.map(|s| s.u_hat),
            u_bar: self.arb.u_bar,
            v_true,
            instance,
        };
        let finite = rec.v_hat_min.is_none_or(f64::is_finite)
            && rec.v_true.is_none_or(f64::is_finite)
            && rec.u_hat.is_none_or(|u| u.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(SimError::Fault { t });
        }
        Ok(rec)
    }

    /// Smallest ground-truth value over the target instances.
    fn min_true_value(&self) -> Result<Option<f64>, SimError> {
        let h = self.cfg.chain.forward(&self.q).map_err(ClfError::from)?;
        let mut best: Option<f64> = None;
        for inst in self.scene.targets() {
            let g = resolve_goal(&h, &inst.goal_set(), self.cfg.clf.k)?;
            let v = clf_value(&h, &g, self.cfg.clf.k);
            best = Some(best.map_or(v, |b| b.min(v)));
        }
        Ok(best)
    }

    /// Tool-point distance to the nearest goal of instance `id`.
    pub fn position_error(&self, id: u32) -> Result<Option<f64>, SimError> {
        let Some(inst) = self.scene.get(id) else { return Ok(None) };
        let h = self.cfg.chain.forward(&self.q).map_err(ClfError::from)?;
        let g = resolve_goal(&h, &inst.goal_set(), self.cfg.clf.k)?;
        Ok(Some((h.translation - g.translation).norm()))
    }

    fn outcome(&self) -> Result<EpisodeOutcome, SimError> {
        match self.grasp {
            Some(g) => {
                let (err, tol) = match g.instance {
                    Some(id) => {
                        let tol = self.scene.get(id).map(|i| i.category.tolerance);
                        (self.position_error(id)?, tol)
                    }
                    None => (None, None),
                };
                let success = matches!((err, tol), (Some(e), Some(t)) if e <= t);
                Ok(EpisodeOutcome {
                    success,
                    reason: EndReason::Converged,
                    time_to_grasp: Some(g.t),
                    final_position_error: err,
                    target_instance: g.instance,
                })
            }
            None => Ok(EpisodeOutcome {
                success: false,
                reason: EndReason::Timeout,
                time_to_grasp: None,
                final_position_error: None,
                target_instance: None,
            }),
        }
    }
}

/// Steps until the grasp fires or `max_time` elapses. Numerical faults end
/// the episode as a failure with reason [`EndReason::Fault`].
pub fn run_episode(cfg: &EpisodeConfig, setup: &EpisodeSetup) -> Result<(TrajectoryLog, EpisodeOutcome), SimError> {
    let mut ep = Episode::new(cfg, setup)?;
    let mut log = Vec::new();
    while !ep.grasped() && ep.time() < cfg.max_time - 1e-9 {
        match ep.step() {
            Ok(rec) => log.push(rec),
            Err(SimError::Fault { .. }) => {
                let outcome = EpisodeOutcome {
                    success: false,
                    reason: EndReason::Fault,
                    time_to_grasp: None,
                    final_position_error: None,
                    target_instance: None,
                };
                return Ok((log, outcome));
            }
            Err(e) => return Err(e),
        }
    }
    let outcome = ep.outcome()?;
    Ok((log, outcome))
}

/// Experiment matrix: categories × simultaneous-instance counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub categories: Vec<String>,
    pub instance_counts: Vec<usize>,
    pub episodes: usize,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub category: String,
    pub instances: usize,
    pub episodes: usize,
    pub successes: usize,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchTable {
    pub rows: Vec<BatchRow>,
    pub episodes: usize,
    pub successes: usize,
    pub percent: f64,
}

impl BatchTable {
    /// One line per category with a column per instance count, like a
    /// grasp-success table.
    pub fn to_text(&self) -> String {
        let mut counts: Vec<usize> = self.rows.iter().map(|r| r.instances).collect();
        counts.sort_unstable();
        counts.dedup();
        let mut cats: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !cats.contains(&r.category.as_str()) {
                cats.push(&r.category);
            }
        }
        let name_w = cats.iter().map(|c| c.len()).max().unwrap_or(0).max("category".len());
        let mut out = format!("{:<name_w$}", "category");
        for c in &counts {
            out.push_str(&format!(" {:>7}", c));
        }
        out.push_str(&format!(" {:>7}\n", "%"));
        for cat in &cats {
            out.push_str(&format!("{:<name_w$}", cat));
            let (mut s, mut n) = (0, 0);
            for c in &counts {
                match self.rows.iter().find(|r| r.category == *cat && r.instances == *c) {
                    Some(r) => {
                        out.push_str(&format!(" {:>7}", format!("{}/{}", r.successes, r.episodes)));
                        s += r.successes;
                        n += r.episodes;
                    }
                    None => out.push_str(&format!(" {:>7}", "-")),
                }
            }
            out.push_str(&format!(" {:>7.1}\n", 100.0 * s as f64 / n.max(1) as f64));
        }
        out.push_str(&format!("{:<name_w$} {:>w$.1}\n", "overall", self.percent, w = 8 * counts.len() + 7));
        out
    }
}

/// Builds one episode (scene, start, seed) for a batch cell.
pub trait EpisodeSampler: Sync {
    fn sample(&self, category: &str, instances: usize, seed: u64) -> Result<EpisodeSetup, SimError>;
}

/// Runs every (category, count, episode) cell. Each episode derives its
/// randomness from `(seed, category index, count, episode index)`, so the
/// table does not depend on `workers`.
pub fn run_batch(cfg: &EpisodeConfig, sampler: &impl EpisodeSampler, spec: &BatchSpec) -> Result<BatchTable, SimError> {
    if spec.episodes == 0 {
        return Err(SimError::Config("episode count must be >= 1".into()));
    }
    if spec.categories.is_empty() {
        return Err(SimError::Config("category list is empty".into()));
    }
    if spec.instance_counts.is_empty() || spec.instance_counts.contains(&0) {
        return Err(SimError::Config("instance counts must be >= 1".into()));
    }
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..spec.categories.len())
        .flat_map(|c| spec.instance_counts.iter().flat_map(move |&n| (0..spec.episodes).map(move |e| (c, n, e))))
        .collect();
    let run = |&(c, n, e): &(usize, usize, usize)| -> Result<bool, SimError> {
        let seed = crate::derive_seed(spec.seed, &[c as u64, n as u64, e as u64]);
        let setup = sampler.sample(&spec.categories[c], n, seed)?;
        let (_, outcome) = run_episode(cfg, &setup)?;
        Ok(outcome.success)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| SimError::Config(e.to_string()))?;
    let results: Vec<bool> = pool.install(|| jobs.par_iter().map(run).collect::<Result<_, _>>())?;

    let mut rows = Vec::new();
    for (c, cat) in spec.categories.iter().enumerate() {
        for &n in &spec.instance_counts {
            let successes = jobs.iter().zip(&results).filter(|((jc, jn, _), ok)| *jc == c && *jn == n && **ok).count();
            rows.push(BatchRow {
                category: cat.clone(),
                instances: n,
                episodes: spec.episodes,
                successes,
                percent: 100.0 * successes as f64 / spec.episodes as f64,
            });
        }
    }
    let successes = results.iter().filter(|s| **s).count();
    Ok(BatchTable {
        rows,
        episodes: results.len(),
        successes,
        percent: 100.0 * successes as f64 / results.len() as f64,
    })
}
