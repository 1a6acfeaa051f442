//! Symmetry-aware control Lyapunov function for reaching.
//!
//! `V(H) = ½‖H − G‖²_kF` with the goal `G` chosen from the symmetry set of
//! the target as the pose nearest to the current end-effector pose `H`. The
//! joint velocity control is `u = −J(θ)⁻¹ (∇V)^∨` with
//! `∇V = proj_k(Hᵀ(H − G))`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    proj_se3_k, skew, vec3_serde, vee, weighted_frob_dist_sq, NormWeight, Pose, Rotation, Twist, VALIDITY_TOL,
};
use crate::kinematics::{solve_joint_velocity, JointConfig, JointVelocity, KinematicsError, Manipulator, SolverParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClfError {
    #[error("goal set is empty")]
    EmptyGoalSet,
    #[error("axial goal axis must be unit length, got norm {0}")]
    BadAxis(f64),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Admissible grasp poses of one object instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", try_from = "RawGoalSet")]
pub enum GoalSet {
    Discrete(Vec<Pose>),
    /// `{ base · Rot(axis, φ) : φ ∈ ℝ }` with the axis in the base's body frame.
    Axial {
        base: Pose,
        #[serde(with = "vec3_serde")]
        axis: Vector3<f64>,
    },
    Union(Vec<GoalSet>),
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawGoalSet {
    Discrete(Vec<Pose>),
    Axial {
        base: Pose,
        #[serde(with = "vec3_serde")]
        axis: Vector3<f64>,
    },
    Union(Vec<GoalSet>),
}

impl TryFrom<RawGoalSet> for GoalSet {
    type Error = ClfError;
    fn try_from(raw: RawGoalSet) -> Result<Self, ClfError> {
        match raw {
            RawGoalSet::Discrete(p) => GoalSet::discrete(p),
            RawGoalSet::Axial { base, axis } => {
                // configs are hand-written; accept a few digits of slack and normalize
                let n = axis.norm();
                if !(n.is_finite() && (n - 1.0).abs() < 1e-3) {
                    return Err(ClfError::BadAxis(n));
                }
                GoalSet::axial(base, axis / n)
            }
            RawGoalSet::Union(u) => GoalSet::union(u),
        }
    }
}

impl GoalSet {
    pub fn single(pose: Pose) -> Self {
        GoalSet::Discrete(vec![pose])
    }

    pub fn discrete(poses: Vec<Pose>) -> Result<Self, ClfError> {
        if poses.is_empty() {
            return Err(ClfError::EmptyGoalSet);
        }
        Ok(GoalSet::Discrete(poses))
    }

    pub fn axial(base: Pose, axis: Vector3<f64>) -> Result<Self, ClfError> {
        let n = axis.norm();
        if !n.is_finite() || (n - 1.0).abs() > VALIDITY_TOL {
            return Err(ClfError::BadAxis(n));
        }
        Ok(GoalSet::Axial { base, axis })
    }

    pub fn union(sets: Vec<GoalSet>) -> Result<Self, ClfError> {
        if sets.is_empty() {
            return Err(ClfError::EmptyGoalSet);
        }
        Ok(GoalSet::Union(sets))
    }

    /// The same family expressed after left-multiplying by `frame`.
    pub fn placed_at(&self, frame: &Pose) -> GoalSet {
        match self {
            GoalSet::Discrete(p) => GoalSet::Discrete(p.iter().map(|g| frame.compose(g)).collect()),
            GoalSet::Axial { base, axis } => GoalSet::Axial { base: frame.compose(base), axis: *axis },
            GoalSet::Union(u) => GoalSet::Union(u.iter().map(|g| g.placed_at(frame)).collect()),
        }
    }

    /// Member of an axial family at angle `phi`.
    pub fn axial_member(base: &Pose, axis: &Vector3<f64>, phi: f64) -> Pose {
        let r = Rotation::from_axis_angle(axis, phi).unwrap_or_else(|_| Rotation::exp(&(axis.normalize() * phi)));
        Pose::new(base.rotation.compose(&r), base.translation)
    }
}

/// Angle `φ*` of the nearest member of `{ base · Rot(axis, φ) }` to `h`.
pub fn axial_argmin_angle(h: &Pose, base: &Pose, axis: &Vector3<f64>) -> f64 {
    let q: Matrix3<f64> = base.rotation.matrix().transpose() * h.rotation.matrix();
    let k = skew(axis);
    let c1 = -(k * q).trace();
    let c2 = (k * k * q).trace();
    // tr(Rot(φ)ᵀQ) − tr(Q) = c1·sin φ + c2·(1 − cos φ)
    let score = |phi: f64| c1 * phi.sin() + c2 * (1.0 - phi.cos());
    let phi = c1.atan2(-c2);
    let other = if phi > 0.0 { phi - std::f64::consts::PI } else { phi + std::f64::consts::PI };
    if score(other) > score(phi) {
        other
    } else {
        phi
    }
}

/// Nearest admissible goal to `h` and its squared weighted distance.
pub fn resolve_goal_with_distance(h: &Pose, gs: &GoalSet, k: NormWeight) -> Result<(Pose, f64), ClfError> {
    match gs {
        GoalSet::Discrete(poses) => {
            let mut best: Option<(Pose, f64)> = None;
            for g in poses {
                let d = weighted_frob_dist_sq(h, g, k);
                // strict comparison keeps the lowest index on ties
                if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                    best = Some((*g, d));
                }
            }
            best.ok_or(ClfError::EmptyGoalSet)
        }
        GoalSet::Axial { base, axis } => {
            let phi = axial_argmin_angle(h, base, axis);
            let g = GoalSet::axial_member(base, axis, phi);
            Ok((g, weighted_frob_dist_sq(h, &g, k)))
        }
        GoalSet::Union(sets) => {
            let mut best: Option<(Pose, f64)> = None;
            for s in sets {
                let (g, d) = resolve_goal_with_distance(h, s, k)?;
                if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                    best = Some((g, d));
                }
            }
            best.ok_or(ClfError::EmptyGoalSet)
        }
    }
}

/// `argmin_{G ∈ gs} ‖H − G‖²_kF`.
pub fn resolve_goal(h: &Pose, gs: &GoalSet, k: NormWeight) -> Result<Pose, ClfError> {
    resolve_goal_with_distance(h, gs, k).map(|(g, _)| g)
}

/// `V = ½‖H − G‖²_kF`.
pub fn clf_value(h: &Pose, g: &Pose, k: NormWeight) -> f64 {
    0.5 * weighted_frob_dist_sq(h, g, k)
}

/// `(proj_k(Hᵀ(H − G)))^∨`, angular part first.
pub fn clf_gradient(h: &Pose, g: &Pose, k: NormWeight) -> Twist {
    let hm = h.to_matrix();
    let d = hm.transpose() * (hm - g.to_matrix());
    let xi = vee(&proj_se3_k(&d, k)).expect("projection lands in se(3)");
    Twist::from_vector(&xi)
}

/// Pairing under which `dV(H·exp(εξ))/dε = ⟨∇V, ξ⟩`: the angular block
/// counts twice because `tr(AᵀB) = 2a·b` for skew matrices.
pub fn gradient_pairing(g: &Twist, xi: &Twist) -> f64 {
    2.0 * g.omega.dot(&xi.omega) + g.vel.dot(&xi.vel)
}

/// Predicted `dV/dt` under exact tracking of `−∇V`.
pub fn predicted_decrease_rate(g: &Twist) -> f64 {
    -(2.0 * g.omega.norm_squared() + g.vel.norm_squared())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClfParams {
    pub k: NormWeight,
    pub grasp_threshold: f64,
}

impl Default for ClfParams {
    fn default() -> Self {
        Self { k: NormWeight::default(), grasp_threshold: 0.005 }
    }
}

impl ClfParams {
    pub fn validate(&self) -> Result<(), ClfError> {
        if !(self.grasp_threshold > 0.0 && self.grasp_threshold.is_finite()) {
            return Err(ClfError::BadParam(format!("grasp_threshold must be > 0, got {}", self.grasp_threshold)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOutput {
    pub u: JointVelocity,
    pub value: f64,
    pub resolved_goal: Pose,
    pub grad: Twist,
}

/// Gradient norm below which the saddle escape kicks in.
const STALL_GRAD_NORM: f64 = 1e-8;
/// Size of the escape rotation.
const STALL_KICK: f64 = 0.01;

/// Body-frame rotation twist that escapes the rotation-by-π critical set.
///
/// Samples the 26 neighbours of the unit cube and keeps the direction whose
/// small rotation lowers `V` the most.
fn stall_escape(h: &Pose, g: &Pose, k: NormWeight) -> Twist {
    let mut best = (f64::INFINITY, Vector3::zeros());
    for x in -1i32..=1 {
        for y in -1i32..=1 {
            for z in -1i32..=1 {
                if x == 0 && y == 0 && z == 0 {
                    continue;
                }
                let dir = Vector3::new(x as f64, y as f64, z as f64).normalize();
                let moved = h.compose(&Pose::from_rotation(Rotation::exp(&(dir * STALL_KICK))));
                let v = clf_value(&moved, g, k);
                if v < best.0 {
                    best = (v, dir);
                }
            }
        }
    }
    Twist::new(best.1 * STALL_KICK, Vector3::zeros())
}

/// Velocity control for one goal family: resolve the goal, take the
/// gradient and map `−∇V` through the (damped) inverse body Jacobian.
pub fn velocity_control(
    arm: &impl Manipulator,
    q: &JointConfig,
    gs: &GoalSet,
    params: &ClfParams,
    solver: &SolverParams,
) -> Result<ControlOutput, ClfError> {
    let h = arm.forward(q)?;
    let (goal, dist) = resolve_goal_with_distance(&h, gs, params.k)?;
    let value = 0.5 * dist;
    let grad = clf_gradient(&h, &goal, params.k);
    let grad_norm = grad.to_vector().norm();
    let command = if grad_norm < STALL_GRAD_NORM && value > params.grasp_threshold {
        stall_escape(&h, &goal, params.k)
    } else {
        grad.scale(-1.0)
    };
    let jac = arm.body_jacobian(q)?;
    let u = solve_joint_velocity(&jac, &command, solver, &arm.speed_caps())?;
    Ok(ControlOutput { u, value, resolved_goal: goal, grad })
}
