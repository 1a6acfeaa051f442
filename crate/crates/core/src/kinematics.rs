//! Six-joint serial-chain kinematics: forward kinematics from a
//! Denavit–Hartenberg table, the body-frame velocity Jacobian and damped
//! Jacobian inversion.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{vec6_serde, Pose, Rotation, Twist};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("joint {joint} at {value} rad is outside [{lo}, {hi}]")]
    JointLimit { joint: usize, value: f64, lo: f64, hi: f64 },
    #[error("Jacobian is singular (sigma_min {sigma_min:e}) and damping is zero")]
    SingularNoDamping { sigma_min: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("non-finite joint value")]
    NonFinite,
}

/// Joint angles in radians.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(#[serde(with = "vec6_serde")] pub Vector6<f64>);

impl JointConfig {
    pub fn zeros() -> Self {
        Self(Vector6::zeros())
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self(Vector6::from(a))
    }

    pub fn as_array(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.0[i])
    }
}

/// Joint rates in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVelocity(#[serde(with = "vec6_serde")] pub Vector6<f64>);

impl JointVelocity {
    pub fn zeros() -> Self {
        Self(Vector6::zeros())
    }
}

/// One row of a standard DH table plus limits for the revolute joint it drives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhJoint {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    pub theta_offset: f64,
    pub limit_lo: f64,
    pub limit_hi: f64,
    pub speed_cap: f64,
}

impl DhJoint {
    /// `Rz(θ) · Tz(d) · Tx(a) · Rx(α)`.
    pub fn transform(&self, theta: f64) -> Pose {
        let (st, ct) = (theta + self.theta_offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let r = Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca);
        Pose::new(Rotation::from_matrix_unchecked(r), Vector3::new(self.a * ct, self.a * st, self.d))
    }
}

/// Six revolute joints described by a standard DH table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainFile", into = "ChainFile")]
pub struct KinematicChain {
    joints: [DhJoint; 6],
}

#[derive(Serialize, Deserialize)]
struct ChainFile {
    joints: Vec<DhJoint>,
}

impl TryFrom<ChainFile> for KinematicChain {
    type Error = KinematicsError;
    fn try_from(f: ChainFile) -> Result<Self, Self::Error> {
        let n = f.joints.len();
        let joints: [DhJoint; 6] =
            f.joints.try_into().map_err(|_| KinematicsError::InvalidChain(format!("expected 6 joints, got {n}")))?;
        KinematicChain::new(joints)
    }
}

impl From<KinematicChain> for ChainFile {
    fn from(c: KinematicChain) -> Self {
        ChainFile { joints: c.joints.to_vec() }
    }
}

const UR5_JSON: &str = include_str!("../data/ur5.json");

impl KinematicChain {
    pub fn new(joints: [DhJoint; 6]) -> Result<Self, KinematicsError> {
        for (i, j) in joints.iter().enumerate() {
            let vals = [j.a, j.d, j.alpha, j.theta_offset, j.limit_lo, j.limit_hi, j.speed_cap];
            if vals.iter().any(|v| v.is_nan()) {
                return Err(KinematicsError::InvalidChain(format!("joint {i} has NaN parameters")));
            }
            if !(j.limit_lo <= j.limit_hi) {
                return Err(KinematicsError::InvalidChain(format!("joint {i} limits inverted")));
            }
            if !(j.speed_cap > 0.0) {
                return Err(KinematicsError::InvalidChain(format!("joint {i} speed cap must be > 0")));
            }
        }
        Ok(Self { joints })
    }

    /// The shipped UR5 table.
    pub fn ur5() -> Self {
        serde_json::from_str(UR5_JSON).expect("bundled UR5 table is valid")
    }

    /// All DH parameters zero, unbounded limits.
    pub fn zero_dh() -> Self {
        let j = DhJoint {
            a: 0.0,
            d: 0.0,
            alpha: 0.0,
            theta_offset: 0.0,
            limit_lo: f64::NEG_INFINITY,
            limit_hi: f64::INFINITY,
            speed_cap: f64::INFINITY,
        };
        Self { joints: [j; 6] }
    }

    pub fn joints(&self) -> &[DhJoint; 6] {
        &self.joints
    }

    pub fn joints_mut(&mut self) -> &mut [DhJoint; 6] {
        &mut self.joints
    }

    /// Sum of `|a| + |d|` over all links.
    pub fn total_link_length(&self) -> f64 {
        self.joints.iter().map(|j| j.a.abs() + j.d.abs()).sum()
    }

    /// Frames `T_0 … T_6` from base to flange.
    fn frames(&self, q: &JointConfig) -> [Pose; 7] {
        let mut out = [Pose::identity(); 7];
        for i in 0..6 {
            out[i + 1] = out[i].compose(&self.joints[i].transform(q.0[i]));
        }
        out
    }
}

/// Anything that maps joint angles to an end-effector pose with a body Jacobian.
pub trait Manipulator: Sync {
    fn forward(&self, q: &JointConfig) -> Result<Pose, KinematicsError>;

    /// `J` with `hat(J·θ̇) = H⁻¹·Ḣ`, rows ordered `(ω, v)`.
    fn body_jacobian(&self, q: &JointConfig) -> Result<Matrix6<f64>, KinematicsError>;

    fn limits(&self) -> (Vector6<f64>, Vector6<f64>);

    fn speed_caps(&self) -> Vector6<f64>;

    fn check_limits(&self, q: &JointConfig) -> Result<(), KinematicsError> {
        let (lo, hi) = self.limits();
        for i in 0..6 {
            let v = q.0[i];
            if !v.is_finite() {
                return Err(KinematicsError::NonFinite);
            }
            if v < lo[i] || v > hi[i] {
                return Err(KinematicsError::JointLimit { joint: i, value: v, lo: lo[i], hi: hi[i] });
            }
        }
        Ok(())
    }

    fn clamp_to_limits(&self, q: &JointConfig) -> JointConfig {
        let (lo, hi) = self.limits();
        JointConfig(Vector6::from_fn(|i, _| q.0[i].clamp(lo[i], hi[i])))
    }
}

impl Manipulator for KinematicChain {
    fn forward(&self, q: &JointConfig) -> Result<Pose, KinematicsError> {
        self.check_limits(q)?;
        Ok(self.frames(q)[6])
    }

    fn body_jacobian(&self, q: &JointConfig) -> Result<Matrix6<f64>, KinematicsError> {
        self.check_limits(q)?;
        let frames = self.frames(q);
        let ee = &frames[6];
        let rt = ee.rotation.transpose();
        let mut jac = Matrix6::zeros();
        for (i, frame) in frames.iter().take(6).enumerate() {
            let z = frame.rotation.matrix().column(2).into_owned();
            let w = rt * z;
            let v = rt * z.cross(&(ee.translation - frame.translation));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&w);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&v);
        }
        Ok(jac)
    }

    fn limits(&self) -> (Vector6<f64>, Vector6<f64>) {
        (Vector6::from_fn(|i, _| self.joints[i].limit_lo), Vector6::from_fn(|i, _| self.joints[i].limit_hi))
    }

    fn speed_caps(&self) -> Vector6<f64> {
        Vector6::from_fn(|i, _| self.joints[i].speed_cap)
    }
}

/// A fully actuated free body: `H(q) = anchor · exp(hat(q))`.
///
/// Its body Jacobian is the identity at `q = 0`, so re-anchoring after each
/// step gives a plant whose joint rates are exactly body twists.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeBody {
    pub anchor: Pose,
    pub speed_cap: f64,
}

impl FreeBody {
    pub fn new(anchor: Pose) -> Self {
        Self { anchor, speed_cap: f64::INFINITY }
    }
}

fn ad(xi: &Vector6<f64>) -> Matrix6<f64> {
    let w = crate::geometry::skew(&Vector3::new(xi[0], xi[1], xi[2]));
    let v = crate::geometry::skew(&Vector3::new(xi[3], xi[4], xi[5]));
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&v);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    m
}

impl Manipulator for FreeBody {
    fn forward(&self, q: &JointConfig) -> Result<Pose, KinematicsError> {
        self.check_limits(q)?;
        Ok(self.anchor.compose(&Pose::exp(&Twist::from_vector(&q.0))))
    }

    /// Right Jacobian of the SE(3) exponential, `Σ (−ad_q)ⁿ / (n+1)!`.
    fn body_jacobian(&self, q: &JointConfig) -> Result<Matrix6<f64>, KinematicsError> {
        self.check_limits(q)?;
        let minus_ad = -ad(&q.0);
        let mut term = Matrix6::identity();
        let mut sum = Matrix6::identity();
        for n in 1..200 {
            term = term * minus_ad / (n as f64 + 1.0);
            sum += term;
            if term.amax() < 1e-18 {
                break;
            }
        }
        Ok(sum)
    }

    fn limits(&self) -> (Vector6<f64>, Vector6<f64>) {
        (Vector6::repeat(f64::NEG_INFINITY), Vector6::repeat(f64::INFINITY))
    }

    fn speed_caps(&self) -> Vector6<f64> {
        Vector6::repeat(self.speed_cap)
    }
}

/// Damping and the singular-value threshold that switches to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub damping: f64,
    pub sigma_min_threshold: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { damping: 0.05, sigma_min_threshold: 1e-2 }
    }
}

/// Solves `J·θ̇ = ξ`, falling back to damped least squares below the
/// singular-value threshold, then scales the whole vector down uniformly if
/// any joint exceeds its speed cap.
pub fn solve_joint_velocity(
    jac: &Matrix6<f64>,
    xi: &Twist,
    params: &SolverParams,
    caps: &Vector6<f64>,
) -> Result<JointVelocity, KinematicsError> {
    let rhs = xi.to_vector();
    if rhs.iter().all(|x| *x == 0.0) {
        return Ok(JointVelocity::zeros());
    }
    let svd = jac.svd(true, true);
    let sigma_min = svd.singular_values.min();
    let raw = if sigma_min >= params.sigma_min_threshold {
        svd.solve(&rhs, 0.0).expect("SVD computed with U and V")
    } else if params.damping > 0.0 {
        let lambda2 = params.damping * params.damping;
        let jjt = jac * jac.transpose() + Matrix6::identity() * lambda2;
        let y = jjt.cholesky().expect("JJᵀ + λ²I is positive definite").solve(&rhs);
        jac.transpose() * y
    } else {
        return Err(KinematicsError::SingularNoDamping { sigma_min });
    };
    Ok(JointVelocity(clamp_speed(&raw, caps)))
}

/// Uniform scale-down so that every `|θ̇ᵢ| ≤ capᵢ`.
pub fn clamp_speed(v: &Vector6<f64>, caps: &Vector6<f64>) -> Vector6<f64> {
    let mut scale: f64 = 1.0;
    for i in 0..6 {
        let m = v[i].abs();
        if m > caps[i] {
            scale = scale.min(caps[i] / m);
        }
    }
    v * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{hat, vee};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(chain: &KinematicChain, rng: &mut impl Rng) -> JointConfig {
        let (lo, hi) = chain.limits();
        JointConfig(Vector6::from_fn(|i, _| rng.random_range(lo[i]..hi[i])))
    }

    #[test]
    fn ur5_zero_pose_is_direct_dh_product() {
        let chain = KinematicChain::ur5();
        let h = chain.forward(&JointConfig::zeros()).unwrap();
        // independent product of raw 4×4 DH matrices
        let mut m = nalgebra::Matrix4::identity();
        for j in chain.joints() {
            let (st, ct) = j.theta_offset.sin_cos();
            let (sa, ca) = j.alpha.sin_cos();
            #[rustfmt::skip]
            let t = nalgebra::Matrix4::new(
                ct, -st * ca, st * sa, j.a * ct,
                st, ct * ca, -ct * sa, j.a * st,
                0.0, sa, ca, j.d,
                0.0, 0.0, 0.0, 1.0,
            );
            m *= t;
        }
        assert!((h.to_matrix() - m).amax() < 1e-12);
    }

    #[test]
    fn zero_dh_chain_with_cancelling_offsets_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let q = JointConfig(Vector6::from_fn(|_, _| rng.random_range(-3.0..3.0)));
            let mut chain = KinematicChain::zero_dh();
            for (j, qi) in chain.joints_mut().iter_mut().zip(q.0.iter()) {
                j.theta_offset = -qi;
            }
            let h = chain.forward(&q).unwrap();
            assert!((h.to_matrix() - nalgebra::Matrix4::identity()).amax() < 1e-12);
        }
    }

    #[test]
    fn forward_rejects_out_of_limit_joints() {
        let chain = KinematicChain::ur5();
        let (_, hi) = chain.limits();
        let mut q = JointConfig::zeros();
        q.0[2] = hi[2] + 0.1;
        assert!(matches!(chain.forward(&q), Err(KinematicsError::JointLimit { joint: 2, .. })));
        assert!(matches!(chain.body_jacobian(&q), Err(KinematicsError::JointLimit { .. })));
    }

    #[test]
    fn translation_is_lipschitz_in_joint_angles() {
        let chain = KinematicChain::ur5();
        let l = chain.total_link_length();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let q = random_q(&chain, &mut rng);
            let d = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let d = d * (rng.random_range(0.0..1e-3) / d.norm());
            let q2 = chain.clamp_to_limits(&JointConfig(q.0 + d));
            let dt = chain.forward(&q2).unwrap().translation - chain.forward(&q).unwrap().translation;
            assert!(dt.norm() <= l * (q2.0 - q.0).norm() + 1e-15);
        }
    }

    fn fd_body_jacobian(m: &impl Manipulator, q: &JointConfig, h: f64) -> Matrix6<f64> {
        let mut jac = Matrix6::zeros();
        let h0 = m.forward(q).unwrap().to_matrix();
        let h0_inv = h0.try_inverse().unwrap();
        for i in 0..6 {
            let mut qp = *q;
            let mut qm = *q;
            qp.0[i] += h;
            qm.0[i] -= h;
            let dh = (m.forward(&qp).unwrap().to_matrix() - m.forward(&qm).unwrap().to_matrix()) / (2.0 * h);
            let xi = h0_inv * dh;
            // project the numerically noisy matrix onto se(3) before reading it out
            let mut s = xi;
            let top = xi.fixed_view::<3, 3>(0, 0);
            s.fixed_view_mut::<3, 3>(0, 0).copy_from(&((top - top.transpose()) * 0.5));
            s.fixed_view_mut::<1, 4>(3, 0).fill(0.0);
            jac.set_column(i, &vee(&s).unwrap());
        }
        jac
    }

    #[test]
    fn body_jacobian_matches_finite_differences() {
        let chain = KinematicChain::ur5();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (lo, hi) = chain.limits();
        for _ in 0..100 {
            let q = JointConfig(Vector6::from_fn(|i, _| rng.random_range(lo[i] + 1e-3..hi[i] - 1e-3)));
            let analytic = chain.body_jacobian(&q).unwrap();
            let fd = fd_body_jacobian(&chain, &q, 1e-6);
            assert!((analytic - fd).amax() < 1e-6, "{}", (analytic - fd).amax());
            let min_w = (0..6).map(|i| analytic.fixed_view::<3, 1>(0, i).norm()).fold(f64::INFINITY, f64::min);
            assert!(min_w > 0.0);
            let td = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
            assert!((analytic * (td * 3.5) - (analytic * td) * 3.5).amax() < 1e-12);
        }
    }

    #[test]
    fn free_body_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let body = FreeBody::new(Pose::exp(&Twist::from_vector(&Vector6::new(0.1, 0.2, 0.3, 1.0, 0.0, 0.5))));
        assert_eq!(body.body_jacobian(&JointConfig::zeros()).unwrap(), Matrix6::identity());
        for _ in 0..50 {
            let q = JointConfig(Vector6::from_fn(|_, _| rng.random_range(-1.5..1.5)));
            let analytic = body.body_jacobian(&q).unwrap();
            let fd = fd_body_jacobian(&body, &q, 1e-6);
            assert!((analytic - fd).amax() < 1e-6);
        }
    }

    #[test]
    fn left_invariant_difference_converges_to_jacobian_twist() {
        let chain = KinematicChain::ur5();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (lo, hi) = chain.limits();
        for _ in 0..20 {
            let q = JointConfig(Vector6::from_fn(|i, _| rng.random_range(lo[i] + 0.1..hi[i] - 0.1)));
            let td = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let expected = hat(&(chain.body_jacobian(&q).unwrap() * td));
            let h0 = chain.forward(&q).unwrap().to_matrix();
            let mut prev = f64::INFINITY;
            for eps in [1e-2, 1e-3, 1e-4] {
                let h1 = chain.forward(&JointConfig(q.0 + td * eps)).unwrap().to_matrix();
                let err = (h0.try_inverse().unwrap() * (h1 - h0) / eps - expected).amax();
                assert!(err < prev);
                prev = err;
            }
            assert!(prev < 1e-3);
        }
    }

    #[test]
    fn solver_examples() {
        let caps = Vector6::repeat(10.0);
        let p = SolverParams::default();
        let xi = Twist::from_vector(&Vector6::new(0.0, 0.0, 0.0, 0.5, 0.0, 0.0));
        let td = solve_joint_velocity(&Matrix6::identity(), &xi, &p, &caps).unwrap();
        assert_eq!(td.0, Vector6::new(0.0, 0.0, 0.0, 0.5, 0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let j = Matrix6::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Matrix6::identity() * 3.0;
            let z = solve_joint_velocity(&j, &Twist::zero(), &p, &caps).unwrap();
            assert_eq!(z.0, Vector6::zeros());
            let xi = Twist::from_vector(&Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let td = solve_joint_velocity(&j, &xi, &p, &Vector6::repeat(f64::INFINITY)).unwrap();
            assert!((j * td.0 - xi.to_vector()).norm() <= 1e-10);
        }
    }

    #[test]
    fn singular_jacobian_needs_damping() {
        let mut j = Matrix6::identity();
        j[(5, 5)] = 0.0;
        let xi = Twist::from_vector(&Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0));
        let caps = Vector6::repeat(f64::INFINITY);
        let undamped = SolverParams { damping: 0.0, ..Default::default() };
        assert!(matches!(
            solve_joint_velocity(&j, &xi, &undamped, &caps),
            Err(KinematicsError::SingularNoDamping { .. })
        ));
        let td = solve_joint_velocity(&j, &xi, &SolverParams::default(), &caps).unwrap();
        assert!(td.0.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn damped_solve_is_continuous_in_the_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let p = SolverParams::default();
        let caps = Vector6::repeat(f64::INFINITY);
        for _ in 0..50 {
            let j = Matrix6::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Matrix6::identity() * 2.0;
            let dj = Matrix6::from_fn(|_, _| rng.random_range(-1e-9..1e-9));
            let xi = Twist::from_vector(&Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let a = solve_joint_velocity(&j, &xi, &p, &caps).unwrap();
            let b = solve_joint_velocity(&(j + dj), &xi, &p, &caps).unwrap();
            assert!((a.0 - b.0).amax() <= 1e-5);
        }
    }

    #[test]
    fn speed_clamp_preserves_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let caps = Vector6::repeat(1.0);
        for _ in 0..200 {
            let v = Vector6::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let c = clamp_speed(&v, &caps);
            assert!(c.amax() <= 1.0 + 1e-15);
            let ratio = c.dot(&v) / v.norm_squared();
            assert!(ratio > 0.0);
            assert!((c - v * ratio).amax() < 1e-14);
        }
    }

    #[test]
    fn chain_file_requires_six_joints() {
        let bad = r#"{"joints": []}"#;
        assert!(serde_json::from_str::<KinematicChain>(bad).is_err());
        let text = serde_json::to_string(&KinematicChain::ur5()).unwrap();
        let back: KinematicChain = serde_json::from_str(&text).unwrap();
        assert_eq!(back, KinematicChain::ur5());
    }
}
