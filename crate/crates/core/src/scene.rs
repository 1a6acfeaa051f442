//! Multi-instance tabletop world: object categories, scene sampling,
//! initial end-effector sampling and scripted perturbation events.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3, Vector6};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clf::GoalSet;
use crate::geometry::{vec3_serde, Pose, Rotation};
use crate::kinematics::{solve_joint_velocity, JointConfig, KinematicsError, Manipulator, SolverParams};
use crate::perception::{CameraModel, Projection};

/// Placement attempts per instance before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;
/// Joint-space draws before initial-pose sampling gives up.
pub const MAX_JOINT_DRAWS: usize = 100_000;
/// Cones narrower than this cannot be hit by plain rejection; accepted
/// draws are then rotated onto the cone.
const MIN_REJECTION_CONE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("could not place instance {index} after {MAX_PLACEMENT_ATTEMPTS} attempts")]
    PlacementFailure { index: usize },
    #[error("no initial joint configuration accepted after {MAX_JOINT_DRAWS} draws")]
    SamplingExhausted,
    #[error("unknown instance id {0}")]
    UnknownInstance(u32),
    #[error("instance {0} would overlap another footprint")]
    OverlapViolation(u32),
    #[error("instance id {0} already present")]
    DuplicateId(u32),
    #[error("instance {id} is not resting on the table (z = {z})")]
    OffTable { id: u32, z: f64 },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("invalid scene configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Object class: its grasp family in the object frame, success tolerance and
/// box footprint. The box spans `[-hx, hx] × [-hy, hy] × [0, 2hz]` in the
/// object frame, whose origin sits on the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectCategory {
    pub name: String,
    pub goals: GoalSet,
    pub tolerance: f64,
    #[serde(with = "vec3_serde")]
    pub half_extents: Vector3<f64>,
}

impl ObjectCategory {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.tolerance >= 0.0) {
            return Err(SceneError::BadConfig(format!("{}: tolerance must be >= 0", self.name)));
        }
        if !self.half_extents.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(SceneError::BadConfig(format!("{}: extents must be > 0", self.name)));
        }
        Ok(())
    }

    /// Tool pointing straight down (tool z along world −z).
    fn top_down(height: f64) -> Pose {
        Pose::new(Rotation::about_x(PI), Vector3::new(0.0, 0.0, height))
    }

    /// Mug: inside-out grasp on the cavity axis, free rotation about vertical.
    pub fn mug() -> Self {
        Self {
            name: "mug".into(),
            goals: GoalSet::Axial { base: Self::top_down(0.09), axis: Vector3::z() },
            tolerance: 0.01,
            half_extents: Vector3::new(0.05, 0.05, 0.05),
        }
    }

    /// Spam can: top-down grasp across the short side, two-fold symmetric.
    pub fn spam() -> Self {
        let g = Self::top_down(0.08);
        Self {
            name: "spam".into(),
            goals: GoalSet::Discrete(vec![g, g.compose(&Pose::from_rotation(Rotation::about_z(PI)))]),
            tolerance: 0.01,
            half_extents: Vector3::new(0.05, 0.03, 0.04),
        }
    }

    /// Table leg lying along its x axis: grasp across the leg, free to
    /// rotate about the leg axis, with both jaw orientations.
    pub fn table_leg() -> Self {
        let g = Self::top_down(0.05);
        let flipped = g.compose(&Pose::from_rotation(Rotation::about_z(PI)));
        Self {
            name: "table_leg".into(),
            goals: GoalSet::Union(vec![
                GoalSet::Axial { base: g, axis: Vector3::x() },
                GoalSet::Axial { base: flipped, axis: Vector3::x() },
            ]),
            tolerance: 0.03,
            half_extents: Vector3::new(0.2, 0.025, 0.025),
        }
    }

    pub fn defaults() -> Vec<Self> {
        vec![Self::mug(), Self::table_leg(), Self::spam()]
    }

    /// Box corners in the object frame.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let e = &self.half_extents;
        std::array::from_fn(|i| {
            Vector3::new(
                if i & 1 == 0 { -e.x } else { e.x },
                if i & 2 == 0 { -e.y } else { e.y },
                if i & 4 == 0 { 0.0 } else { 2.0 * e.z },
            )
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneInstance {
    pub id: u32,
    pub category: ObjectCategory,
    pub pose: Pose,
    pub is_distractor: bool,
}

impl SceneInstance {
    /// Goal family placed in the world.
    pub fn goal_set(&self) -> GoalSet {
        self.category.goals.placed_at(&self.pose)
    }

    pub fn center(&self) -> Vector3<f64> {
        self.pose.transform_point(&Vector3::new(0.0, 0.0, self.category.half_extents.z))
    }

    pub fn world_corners(&self) -> [Vector3<f64>; 8] {
        self.category.corners().map(|c| self.pose.transform_point(&c))
    }

    /// Footprint rectangle corners on the table plane.
    fn footprint(&self) -> [Vector2<f64>; 4] {
        let e = &self.category.half_extents;
        let pts = [(-e.x, -e.y), (e.x, -e.y), (e.x, e.y), (-e.x, e.y)];
        pts.map(|(x, y)| {
            let p = self.pose.transform_point(&Vector3::new(x, y, 0.0));
            Vector2::new(p.x, p.y)
        })
    }

    /// Separating-axis test on the two footprint rectangles (touching counts
    /// as disjoint).
    pub fn overlaps(&self, other: &SceneInstance) -> bool {
        let a = self.footprint();
        let b = other.footprint();
        for poly in [&a, &b] {
            for i in 0..2 {
                let edge = poly[i + 1] - poly[i];
                let n = Vector2::new(-edge.y, edge.x);
                let (amin, amax) = project(&a, &n);
                let (bmin, bmax) = project(&b, &n);
                if amax <= bmin || bmax <= amin {
                    return false;
                }
            }
        }
        true
    }
}

fn project(poly: &[Vector2<f64>; 4], n: &Vector2<f64>) -> (f64, f64) {
    poly.iter().map(|p| p.dot(n)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

/// Reachable region for initial poses and the table surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Workspace {
    pub table_height: f64,
    pub table_center: [f64; 2],
    pub table_half_extents: [f64; 2],
    /// Center of the quarter sphere, on the table surface.
    pub sphere_center: [f64; 3],
    pub radius_min: f64,
    pub radius_max: f64,
    /// Width of the acceptance band around each drawn target radius.
    pub radius_band: f64,
    /// Horizontal direction the quarter sphere opens towards.
    pub facing: [f64; 2],
    pub cone_half_angle: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            table_height: 0.0,
            table_center: [0.0, 0.45],
            table_half_extents: [0.3, 0.3],
            sphere_center: [0.0, 0.45, 0.0],
            radius_min: 0.35,
            radius_max: 0.75,
            radius_band: 0.02,
            facing: [0.0, -1.0],
            cone_half_angle: 60f64.to_radians(),
        }
    }
}

impl Workspace {
    pub fn validate(&self) -> Result<(), SceneError> {
        let ok = self.radius_min >= 0.0
            && self.radius_max > self.radius_min
            && self.radius_band > 0.0
            && self.cone_half_angle >= 0.0
            && self.cone_half_angle <= PI
            && self.table_half_extents.iter().all(|e| *e >= 0.0)
            && (self.facing[0].hypot(self.facing[1]) > 0.0);
        if ok {
            Ok(())
        } else {
            Err(SceneError::BadConfig("workspace parameters out of range".into()))
        }
    }

    fn center(&self) -> Vector3<f64> {
        Vector3::from(self.sphere_center)
    }

    fn facing_dir(&self) -> Vector3<f64> {
        Vector3::new(self.facing[0], self.facing[1], 0.0).normalize()
    }

    /// Distance of a point from the quarter-sphere center.
    pub fn radius_of(&self, p: &Vector3<f64>) -> f64 {
        (p - self.center()).norm()
    }

    /// Upper half facing `facing`, within the radius range.
    pub fn in_quarter_shell(&self, p: &Vector3<f64>) -> bool {
        let d = p - self.center();
        let r = d.norm();
        d.z >= 0.0 && d.dot(&self.facing_dir()) >= 0.0 && r >= self.radius_min && r <= self.radius_max
    }

    /// Angle between the tool axis and world −z.
    pub fn tool_tilt(pose: &Pose) -> f64 {
        let z = pose.rotation.matrix().column(2).into_owned();
        z.x.hypot(z.y).atan2(-z.z)
    }

    pub fn in_cone(&self, pose: &Pose) -> bool {
        Self::tool_tilt(pose) <= self.cone_half_angle + 1e-9
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub instances: Vec<SceneInstance>,
    pub table_height: f64,
    pub workspace: Workspace,
}

impl Scene {
    pub fn empty(workspace: Workspace) -> Self {
        Self { instances: Vec::new(), table_height: workspace.table_height, workspace }
    }

    pub fn targets(&self) -> impl Iterator<Item = &SceneInstance> {
        self.instances.iter().filter(|i| !i.is_distractor)
    }

    pub fn get(&self, id: u32) -> Option<&SceneInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn next_id(&self) -> u32 {
        self.instances.iter().map(|i| i.id + 1).max().unwrap_or(0)
    }

    /// Unique ids, on-table poses and disjoint footprints.
    pub fn check_invariants(&self) -> Result<(), SceneError> {
        for (i, a) in self.instances.iter().enumerate() {
            if (a.pose.translation.z - self.table_height).abs() > 1e-9 {
                return Err(SceneError::OffTable { id: a.id, z: a.pose.translation.z });
            }
            for b in &self.instances[i + 1..] {
                if a.id == b.id {
                    return Err(SceneError::DuplicateId(a.id));
                }
                if a.overlaps(b) {
                    return Err(SceneError::OverlapViolation(b.id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventAction {
    Add(SceneInstance),
    Remove(u32),
    Move { id: u32, pose: Pose },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationEvent {
    pub time: f64,
    pub action: EventAction,
}

/// Applies one event to a copy of `scene`.
pub fn apply_event(scene: &Scene, event: &PerturbationEvent) -> Result<Scene, SceneError> {
    let mut next = scene.clone();
    match &event.action {
        EventAction::Add(inst) => {
            if next.get(inst.id).is_some() {
                return Err(SceneError::DuplicateId(inst.id));
            }
            next.instances.push(inst.clone());
            check_one(&next, inst.id)?;
        }
        EventAction::Remove(id) => {
            let before = next.instances.len();
            next.instances.retain(|i| i.id != *id);
            if next.instances.len() == before {
                return Err(SceneError::UnknownInstance(*id));
            }
        }
        EventAction::Move { id, pose } => {
            let inst = next.instances.iter_mut().find(|i| i.id == *id).ok_or(SceneError::UnknownInstance(*id))?;
            inst.pose = *pose;
            check_one(&next, *id)?;
        }
    }
    Ok(next)
}

fn check_one(scene: &Scene, id: u32) -> Result<(), SceneError> {
    let inst = scene.get(id).expect("instance just inserted");
    if (inst.pose.translation.z - scene.table_height).abs() > 1e-9 {
        return Err(SceneError::OffTable { id, z: inst.pose.translation.z });
    }
    if scene.instances.iter().any(|o| o.id != id && o.overlaps(inst)) {
        return Err(SceneError::OverlapViolation(id));
    }
    Ok(())
}

/// What to put on the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Category the robot is asked to reach.
    pub category: String,
    pub min_targets: usize,
    pub max_targets: usize,
    pub max_distractors: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { category: "mug".into(), min_targets: 1, max_targets: 3, max_distractors: 2 }
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn fully_visible(cam: &CameraModel, inst: &SceneInstance) -> bool {
    inst.world_corners().iter().all(|c| match cam.project_point(c) {
        Projection::Pixel(p) => p.x >= 0.0 && p.y >= 0.0 && p.x < cam.width as f64 && p.y < cam.height as f64,
        Projection::Behind => false,
    })
}

/// Draws a table-top scene: target count uniform over
/// `min_targets..=max_targets`, distractors from the other categories,
/// positions uniform over the table, yaw uniform in `[−π, π)`.
pub fn sample_scene(
    config: &SceneConfig,
    categories: &[ObjectCategory],
    workspace: &Workspace,
    camera: &CameraModel,
    rng: &mut impl Rng,
) -> Result<Scene, SceneError> {
    if config.max_targets < config.min_targets {
        return Err(SceneError::BadConfig("max_targets < min_targets".into()));
    }
    let target = categories
        .iter()
        .find(|c| c.name == config.category)
        .ok_or_else(|| SceneError::UnknownCategory(config.category.clone()))?;
    let others: Vec<&ObjectCategory> = categories.iter().filter(|c| c.name != config.category).collect();

    let n_targets = rng.random_range(config.min_targets..=config.max_targets);
    let n_distractors = if others.is_empty() { 0 } else { rng.random_range(0..=config.max_distractors) };

    let mut scene = Scene::empty(*workspace);
    for index in 0..n_targets + n_distractors {
        let is_distractor = index >= n_targets;
        let category = if is_distractor { others[rng.random_range(0..others.len())] } else { target };
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let c = workspace.table_center;
            let e = workspace.table_half_extents;
            let x = uniform(rng, c[0] - e[0], c[0] + e[0]);
            let y = uniform(rng, c[1] - e[1], c[1] + e[1]);
            let yaw = uniform(rng, -PI, PI);
            let inst = SceneInstance {
                id: index as u32,
                category: category.clone(),
                pose: Pose::new(Rotation::about_z(yaw), Vector3::new(x, y, workspace.table_height)),
                is_distractor,
            };
            if scene.instances.iter().any(|o| o.overlaps(&inst)) {
                continue;
            }
            if !is_distractor && !fully_visible(camera, &inst) {
                continue;
            }
            placed = Some(inst);
            break;
        }
        scene.instances.push(placed.ok_or(SceneError::PlacementFailure { index })?);
    }
    Ok(scene)
}

/// Rejection sampling in joint space: a target radius is drawn uniformly
/// over the shell, then joint vectors are drawn uniformly within limits (at
/// most one turn per joint) until one puts the tool point inside the quarter
/// shell within `radius_band / 2` of that radius, with the tool axis inside
/// the downward cone.
pub fn sample_initial_joints(
    arm: &impl Manipulator,
    workspace: &Workspace,
    rng: &mut impl Rng,
) -> Result<JointConfig, SceneError> {
    let (lo, hi) = arm.limits();
    if (0..6).any(|i| !(lo[i].is_finite() && hi[i].is_finite())) {
        return Err(SceneError::BadConfig("joint sampling needs finite limits".into()));
    }
    // Joints spanning more than a turn are drawn over the centered turn:
    // same pose distribution, with headroom on both sides.
    let window = |i: usize| {
        if hi[i] - lo[i] > 2.0 * PI {
            let mid = 0.5 * (lo[i] + hi[i]);
            (mid - PI, mid + PI)
        } else {
            (lo[i], hi[i])
        }
    };
    let target_r = uniform(rng, workspace.radius_min, workspace.radius_max);
    let half_band = workspace.radius_band / 2.0;
    let cone = workspace.cone_half_angle.max(MIN_REJECTION_CONE);
    for _ in 0..MAX_JOINT_DRAWS {
        let q = JointConfig(Vector6::from_fn(|i, _| {
            let (a, b) = window(i);
            uniform(rng, a, b)
        }));
        let h = arm.forward(&q)?;
        if (workspace.radius_of(&h.translation) - target_r).abs() > half_band
            || !workspace.in_quarter_shell(&h.translation)
            || Workspace::tool_tilt(&h) > cone
        {
            continue;
        }
        if workspace.in_cone(&h) {
            return Ok(q);
        }
        if let Some(q) = tilt_onto_cone(arm, &q, workspace) {
            if workspace.in_quarter_shell(&arm.forward(&q)?.translation) {
                return Ok(q);
            }
        }
    }
    Err(SceneError::SamplingExhausted)
}

/// Newton iterations that rotate the tool axis onto the cone while holding
/// the tool point fixed.
fn tilt_onto_cone(arm: &impl Manipulator, q0: &JointConfig, ws: &Workspace) -> Option<JointConfig> {
    let down = -Vector3::z();
    let mut q = *q0;
    let target_t = arm.forward(q0).ok()?.translation;
    let solver = SolverParams { damping: 1e-3, sigma_min_threshold: 1e-3 };
    let caps = Vector6::repeat(f64::INFINITY);
    for _ in 0..100 {
        let h = arm.forward(&q).ok()?;
        let z = h.rotation.matrix().column(2).into_owned();
        let tilt = Workspace::tool_tilt(&h);
        let excess = tilt - ws.cone_half_angle;
        let pos_err = target_t - h.translation;
        if excess <= 1e-10 && pos_err.norm() < 1e-10 {
            return Some(q);
        }
        let mut rot_world = Vector3::zeros();
        if excess > 0.0 {
            let axis = z.cross(&down);
            let n = axis.norm();
            let axis = if n > 1e-12 { axis / n } else { h.rotation.matrix().column(0).into_owned() };
            rot_world = axis * excess;
        }
        let rt = h.rotation.transpose();
        let xi = crate::geometry::Twist::new(rt * rot_world, rt * pos_err);
        let jac = arm.body_jacobian(&q).ok()?;
        let dq = solve_joint_velocity(&jac, &xi, &solver, &caps).ok()?;
        q = JointConfig(q.0 + dq.0);
        arm.check_limits(&q).ok()?;
    }
    None
}
