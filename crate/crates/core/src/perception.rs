//! Camera model, grid-cell geometry, ground-truth label rendering and the
//! proposal sources that stand in for a trained network.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector2, Vector3, Vector6};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clf::{velocity_control, ClfError, ClfParams, ControlOutput};
use crate::geometry::{vec6_serde, Pose, Rotation};
use crate::kinematics::{JointConfig, Manipulator, SolverParams};
use crate::scene::{Scene, SceneInstance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("invalid camera: {0}")]
    BadCamera(String),
    #[error("invalid noise model: {0}")]
    BadNoise(String),
}

/// Pinhole camera. The extrinsic is the camera frame expressed in the world
/// frame, with camera z forward, x right and y down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub extrinsic: Pose,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 256.0,
            cy: 192.0,
            width: 512,
            height: 384,
            extrinsic: look_at(&Vector3::new(0.0, -0.35, 0.75), &Vector3::new(0.0, 0.45, 0.0), &Vector3::z()),
        }
    }
}

/// Camera pose at `eye` looking at `target`.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Pose {
    let z = (target - eye).normalize();
    let x = z.cross(up).normalize();
    let y = z.cross(&x);
    Pose::new(Rotation::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])), *eye)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    Pixel(Vector2<f64>),
    Behind,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(PerceptionError::BadCamera("intrinsics out of range".into()))
        }
    }

    pub fn to_camera_frame(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.extrinsic.inverse().transform_point(p_world)
    }

    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Projection {
        if p.z <= 1e-6 {
            return Projection::Behind;
        }
        Projection::Pixel(Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn project_point(&self, p_world: &Vector3<f64>) -> Projection {
        self.project_camera_point(&self.to_camera_frame(p_world))
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::for_image(self.width, self.height, GridSpec::STRIDE)
    }
}

/// Square grid cells of `stride` pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    pub stride: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::for_image(512, 384, Self::STRIDE)
    }
}

impl GridSpec {
    pub const STRIDE: u32 = 8;

    pub fn for_image(width: u32, height: u32, stride: u32) -> Self {
        Self { rows: height / stride, cols: width / stride, stride }
    }

    pub fn len(&self) -> usize {
        (self.rows * self.cols) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell covering pixel `(u, v)`, or `None` outside the grid.
    pub fn cell_of_pixel(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let col = (u / self.stride as f64).floor() as u32;
        let row = (v / self.stride as f64).floor() as u32;
        (row < self.rows && col < self.cols).then_some((row, col))
    }

    pub fn cell_center(&self, row: u32, col: u32) -> Vector2<f64> {
        let s = self.stride as f64;
        Vector2::new(col as f64 * s + s / 2.0, row as f64 * s + s / 2.0)
    }

    pub fn index(&self, row: u32, col: u32) -> usize {
        (row * self.cols + col) as usize
    }
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull with interior on the positive side of every edge.
fn convex_hull(mut pts: Vec<Vector2<f64>>) -> Vec<Vector2<f64>> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Point-in-convex-polygon with a top-left fill rule, so that shared edges
/// between adjacent hulls are owned by exactly one side.
fn inside_top_left(hull: &[Vector2<f64>], p: &Vector2<f64>) -> bool {
    let n = hull.len();
    for i in 0..n {
        let a = &hull[i];
        let b = &hull[(i + 1) % n];
        let c = cross(a, b, p);
        if c < 0.0 {
            return false;
        }
        if c == 0.0 {
            let d = b - a;
            let top_left = d.y < 0.0 || (d.y == 0.0 && d.x > 0.0);
            if !top_left {
                return false;
            }
        }
    }
    true
}

/// Cells whose center lies inside the projected hull of the instance box.
pub fn footprint_cells(cam: &CameraModel, grid: &GridSpec, inst: &SceneInstance) -> Vec<(u32, u32)> {
    let pts: Vec<Vector2<f64>> = inst
        .world_corners()
        .iter()
        .filter_map(|c| match cam.project_point(c) {
            Projection::Pixel(p) => Some(p),
            Projection::Behind => None,
        })
        .collect();
    let hull = convex_hull(pts);
    if hull.len() < 3 {
        return Vec::new();
    }
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &hull {
        umin = umin.min(p.x);
        umax = umax.max(p.x);
        vmin = vmin.min(p.y);
        vmax = vmax.max(p.y);
    }
    let s = grid.stride as f64;
    let c0 = ((umin / s).floor().max(0.0)) as u32;
    let c1 = ((umax / s).ceil().min(grid.cols as f64)) as u32;
    let r0 = ((vmin / s).floor().max(0.0)) as u32;
    let r1 = ((vmax / s).ceil().min(grid.rows as f64)) as u32;
    let mut cells = Vec::new();
    for row in r0..r1 {
        for col in c0..c1 {
            if inside_top_left(&hull, &grid.cell_center(row, col)) {
                cells.push((row, col));
            }
        }
    }
    cells
}

/// One supervised grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelCell {
    #[serde(rename = "r")]
    pub row: u32,
    #[serde(rename = "c")]
    pub col: u32,
    #[serde(rename = "id")]
    pub instance_id: u32,
    pub y: u8,
    #[serde(rename = "V")]
    pub value: f64,
    #[serde(rename = "u", with = "vec6_serde")]
    pub control: Vector6<f64>,
}

/// Foreground cells with their shared per-instance `(V, u)` targets,
/// sorted by `(row, col)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLabels {
    pub grid: GridSpec,
    pub cells: Vec<LabelCell>,
}

impl GridLabels {
    pub fn empty(grid: GridSpec) -> Self {
        Self { grid, cells: Vec::new() }
    }

    pub fn owner_of(&self, row: u32, col: u32) -> Option<u32> {
        self.cells.binary_search_by(|c| (c.row, c.col).cmp(&(row, col))).ok().map(|i| self.cells[i].instance_id)
    }

    /// All cells of one instance carry bit-identical `(V, u)`.
    pub fn labels_shared(&self) -> bool {
        let mut seen: BTreeMap<u32, (u64, [u64; 6])> = BTreeMap::new();
        self.cells.iter().all(|c| {
            let key = (c.value.to_bits(), std::array::from_fn(|i| c.control[i].to_bits()));
            *seen.entry(c.instance_id).or_insert(key) == key
        })
    }
}

/// Per-instance control targets plus the owned cells.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedLabels {
    pub labels: GridLabels,
    pub controls: BTreeMap<u32, ControlOutput>,
}

/// Ground-truth labels for joint configuration `q`: each target instance
/// owns the cells of its projected footprint, contested cells go to the
/// instance whose box center is nearer the camera, and every owned cell
/// carries that instance's `(V, u)`. Distractors never own cells.
pub fn render_labels_detailed(
    scene: &Scene,
    arm: &impl Manipulator,
    q: &JointConfig,
    cam: &CameraModel,
    grid: &GridSpec,
    params: &ClfParams,
    solver: &SolverParams,
) -> Result<RenderedLabels, ClfError> {
    // cell -> (depth, id)
    let mut owner: BTreeMap<(u32, u32), (f64, u32)> = BTreeMap::new();
    for inst in scene.targets() {
        let depth = cam.to_camera_frame(&inst.center()).z;
        for cell in footprint_cells(cam, grid, inst) {
            let e = owner.entry(cell).or_insert((depth, inst.id));
            if depth < e.0 || (depth == e.0 && inst.id < e.1) {
                *e = (depth, inst.id);
            }
        }
    }
    let mut controls = BTreeMap::new();
    for inst in scene.targets() {
        if owner.values().any(|(_, id)| *id == inst.id) {
            controls.insert(inst.id, velocity_control(arm, q, &inst.goal_set(), params, solver)?);
        }
    }
    let cells = owner
        .into_iter()
        .map(|((row, col), (_, id))| {
            let c = &controls[&id];
            LabelCell { row, col, instance_id: id, y: 1, value: c.value, control: c.u.0 }
        })
        .collect();
    Ok(RenderedLabels { labels: GridLabels { grid: *grid, cells }, controls })
}

pub fn render_labels(
    scene: &Scene,
    arm: &impl Manipulator,
    q: &JointConfig,
    cam: &CameraModel,
    grid: &GridSpec,
    params: &ClfParams,
    solver: &SolverParams,
) -> Result<GridLabels, ClfError> {
    render_labels_detailed(scene, arm, q, cam, grid, params, solver).map(|r| r.labels)
}

/// One network-style output cell. Cells absent from a [`ProposalGrid`]
/// have score 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub row: u32,
    pub col: u32,
    pub score: f64,
    pub v_hat: f64,
    #[serde(with = "vec6_serde")]
    pub u_hat: Vector6<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalGrid {
    pub grid: GridSpec,
    pub cells: Vec<Proposal>,
}

impl ProposalGrid {
    pub fn empty(grid: GridSpec) -> Self {
        Self { grid, cells: Vec::new() }
    }
}

/// Zero-error stand-in for the network.
pub fn oracle_proposals(labels: &GridLabels) -> ProposalGrid {
    ProposalGrid {
        grid: labels.grid,
        cells: labels
            .cells
            .iter()
            .map(|c| Proposal { row: c.row, col: c.col, score: 1.0, v_hat: c.value, u_hat: c.control })
            .collect(),
    }
}

/// Error model for [`noisy_proposals`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    pub sigma_v: f64,
    pub sigma_u: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub fp_v_range: [f64; 2],
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { sigma_v: 0.0, sigma_u: 0.0, fp_rate: 0.0, fn_rate: 0.0, fp_v_range: [0.0, 1.0] }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        if !(self.sigma_v >= 0.0 && self.sigma_u >= 0.0) {
            return Err(PerceptionError::BadNoise("sigmas must be >= 0".into()));
        }
        if !(rate(self.fp_rate) && rate(self.fn_rate)) {
            return Err(PerceptionError::BadNoise("rates must lie in [0, 1]".into()));
        }
        if !(self.fp_v_range[0] <= self.fp_v_range[1]) {
            return Err(PerceptionError::BadNoise("fp_v_range must be ordered".into()));
        }
        Ok(())
    }
}

/// Oracle proposals corrupted by dropped foreground cells, Gaussian noise on
/// `(V, u)` and uniformly random false positives on background cells.
/// Cells are visited in row-major order so the draw sequence is fixed.
pub fn noisy_proposals(labels: &GridLabels, noise: &NoiseParams, rng: &mut impl Rng) -> ProposalGrid {
    let grid = labels.grid;
    let normal_v = Normal::new(0.0, noise.sigma_v).expect("sigma_v validated");
    let normal_u = Normal::new(0.0, noise.sigma_u).expect("sigma_u validated");
    let mut fg = labels.cells.iter().peekable();
    let mut cells = Vec::new();
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            match fg.peek() {
                Some(c) if c.row == row && c.col == col => {
                    let c = fg.next().expect("peeked");
                    if rng.random_bool(noise.fn_rate) {
                        continue;
                    }
                    let mut v_hat = c.value;
                    let mut u_hat = c.control;
                    if noise.sigma_v > 0.0 {
                        v_hat = (v_hat + normal_v.sample(rng)).max(0.0);
                    }
                    if noise.sigma_u > 0.0 {
                        u_hat += Vector6::from_fn(|_, _| normal_u.sample(rng));
                    }
                    cells.push(Proposal { row, col, score: 1.0, v_hat, u_hat });
                }
                _ => {
                    if rng.random_bool(noise.fp_rate) {
                        let [lo, hi] = noise.fp_v_range;
                        let v_hat = lo + (hi - lo) * rng.random::<f64>();
                        let u_hat = Vector6::from_fn(|_, _| rng.random_range(-1.0..=1.0));
                        cells.push(Proposal { row, col, score: 1.0, v_hat, u_hat });
                    }
                }
            }
        }
    }
    ProposalGrid { grid, cells }
}
