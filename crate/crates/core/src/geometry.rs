//! SE(3) / so(3) numeric kernel.
//!
//! Poses are stored as a rotation block plus a translation vector and are
//! read as 4×4 homogeneous matrices with bottom row `(0, 0, 0, 1)`. Twists
//! are ordered angular-first, `(ω, v)`, in every vector readout.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance used for validity checks (orthonormality, unit axes, se(3) shape).
pub const VALIDITY_TOL: f64 = 1e-9;

/// Tolerance for exact algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("matrix is not an element of se(3)")]
    NotSe3,
    #[error("rotation axis must be unit length, got norm {0}")]
    BadAxis(f64),
    #[error("matrix is not a proper rotation (defect {defect:e}, det {det})")]
    NotRotation { defect: f64, det: f64 },
    #[error("norm weight must be positive and finite, got {0}")]
    BadWeight(f64),
}

/// Skew-symmetric matrix `[w]×` with `[w]× x = w × x`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Reads the vector out of a skew-symmetric matrix. Only the strictly lower
/// entries are used.
pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A 3×3 proper rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and `det = +1` within [`VALIDITY_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let defect = orthonormality_defect(&m);
        let det = m.determinant();
        if !defect.is_finite() || defect > VALIDITY_TOL || (det - 1.0).abs() > VALIDITY_TOL {
            return Err(GeometryError::NotRotation { defect, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix without validation. Callers guarantee orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Rodrigues rotation about a unit axis.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self, GeometryError> {
        let n = axis.norm();
        if !n.is_finite() || (n - 1.0).abs() > VALIDITY_TOL {
            return Err(GeometryError::BadAxis(n));
        }
        Ok(Self::rodrigues(axis, angle))
    }

    fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Self {
        let k = skew(axis);
        let (s, c) = angle.sin_cos();
        Self(Matrix3::identity() + k * s + k * k * (1.0 - c))
    }

    pub fn about_x(angle: f64) -> Self {
        Self::rodrigues(&Vector3::x(), angle)
    }

    pub fn about_y(angle: f64) -> Self {
        Self::rodrigues(&Vector3::y(), angle)
    }

    pub fn about_z(angle: f64) -> Self {
        Self::rodrigues(&Vector3::z(), angle)
    }

    /// Rotation by `|w|` about `w / |w|` (identity for `w = 0`).
    pub fn exp(w: &Vector3<f64>) -> Self {
        let angle = w.norm();
        if angle < 1e-300 {
            return Self::identity();
        }
        Self::rodrigues(&(w / angle), angle)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.0)
    }

    /// Nearest rotation in Frobenius norm (polar projection).
    pub fn renormalized(&self) -> Self {
        Self(nearest_rotation(&self.0))
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Composition with drift control: the product is re-projected onto
    /// SO(3) whenever its defect exceeds [`VALIDITY_TOL`].
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let m = self.0 * other.0;
        if orthonormality_defect(&m) > VALIDITY_TOL {
            Self(nearest_rotation(&m))
        } else {
            Self(m)
        }
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

fn orthonormality_defect(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).amax()
}

fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m = &self.0;
        let rows: [f64; 9] = std::array::from_fn(|i| m[(i / 3, i % 3)]);
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[f64; 9]>::deserialize(d)?;
        let m = Matrix3::from_row_slice(&rows);
        // Hand-written configs carry a few digits only; project and then validate loosely.
        let defect = orthonormality_defect(&m);
        if !defect.is_finite() || defect > 1e-3 || m.determinant() <= 0.0 {
            return Err(serde::de::Error::custom(format!("rotation is not orthonormal (defect {defect:e})")));
        }
        if defect <= VALIDITY_TOL {
            return Ok(Rotation(m));
        }
        Ok(Rotation(nearest_rotation(&m)))
    }
}

/// Rigid transform in SE(3).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation,
    #[serde(with = "vec3_serde")]
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Self::new(r, Vector3::zeros())
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Validates the rotation block and the bottom row.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self, GeometryError> {
        let bottom = m.fixed_view::<1, 4>(3, 0);
        if (bottom[0].abs() + bottom[1].abs() + bottom[2].abs() + (bottom[3] - 1.0).abs()) > VALIDITY_TOL {
            return Err(GeometryError::NotSe3);
        }
        let r = Rotation::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        Ok(Self::new(r, m.fixed_view::<3, 1>(0, 3).into_owned()))
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(self.rotation.compose(&other.rotation), self.rotation.matrix() * other.translation + self.translation)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt.matrix() * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.matrix() * p + self.translation
    }

    /// Group exponential of a twist `(ω, v)`.
    pub fn exp(xi: &Twist) -> Pose {
        let theta = xi.omega.norm();
        let r = Rotation::exp(&xi.omega);
        let v_mat = if theta < 1e-8 {
            let k = skew(&xi.omega);
            Matrix3::identity() + k * 0.5 + k * k / 6.0
        } else {
            let k = skew(&xi.omega);
            let (s, c) = theta.sin_cos();
            Matrix3::identity() + k * ((1.0 - c) / (theta * theta)) + k * k * ((theta - s) / (theta * theta * theta))
        };
        Pose::new(r, v_mat * xi.vel)
    }

    /// Relative rotation angle between the two rotation blocks.
    pub fn angle_to(&self, other: &Pose) -> f64 {
        (self.rotation.transpose() * other.rotation).angle()
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.translation;
        write!(f, "Pose(t = [{:.4}, {:.4}, {:.4}], angle = {:.4} rad)", t.x, t.y, t.z, self.rotation.angle())
    }
}

/// Element of se(3) in vector form.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    #[serde(with = "vec3_serde")]
    pub omega: Vector3<f64>,
    #[serde(with = "vec3_serde")]
    pub vel: Vector3<f64>,
}

impl Twist {
    pub fn new(omega: Vector3<f64>, vel: Vector3<f64>) -> Self {
        Self { omega, vel }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self::new(x.fixed_rows::<3>(0).into_owned(), x.fixed_rows::<3>(3).into_owned())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut x = Vector6::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.omega);
        x.fixed_rows_mut::<3>(3).copy_from(&self.vel);
        x
    }

    pub fn hat(&self) -> Matrix4<f64> {
        hat(&self.to_vector())
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.vel.iter()).all(|x| x.is_finite())
    }

    pub fn scale(&self, c: f64) -> Twist {
        Twist::new(self.omega * c, self.vel * c)
    }
}

/// `(ω, v) ↦ [[ω×, v], [0, 0]]`.
pub fn hat(xi: &Vector6<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    let w = Vector3::new(xi[0], xi[1], xi[2]);
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&w));
    m[(0, 3)] = xi[3];
    m[(1, 3)] = xi[4];
    m[(2, 3)] = xi[5];
    m
}

/// Inverse of [`hat`]. Rejects matrices whose rotation block is not
/// skew-symmetric or whose bottom row is non-zero.
pub fn vee(m: &Matrix4<f64>) -> Result<Vector6<f64>, GeometryError> {
    let top = m.fixed_view::<3, 3>(0, 0);
    let sym = (top + top.transpose()).amax();
    let bottom = m.fixed_view::<1, 4>(3, 0).amax();
    if !(sym <= VALIDITY_TOL && bottom <= VALIDITY_TOL) {
        return Err(GeometryError::NotSe3);
    }
    let w = unskew(&top.into_owned());
    Ok(Vector6::new(w.x, w.y, w.z, m[(0, 3)], m[(1, 3)], m[(2, 3)]))
}

/// Relative weighting of translation against rotation in the pose norm.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NormWeight(f64);

impl NormWeight {
    pub const DEFAULT: f64 = 5.0;

    pub fn new(k: f64) -> Result<Self, GeometryError> {
        if k.is_finite() && k > 0.0 {
            Ok(Self(k))
        } else {
            Err(GeometryError::BadWeight(k))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for NormWeight {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

impl TryFrom<f64> for NormWeight {
    type Error = GeometryError;
    fn try_from(k: f64) -> Result<Self, Self::Error> {
        Self::new(k)
    }
}

impl From<NormWeight> for f64 {
    fn from(k: NormWeight) -> f64 {
        k.0
    }
}

/// `‖R_A − R_B‖²_F + k·‖t_A − t_B‖²`.
pub fn weighted_frob_dist_sq(a: &Pose, b: &Pose, k: NormWeight) -> f64 {
    let dr = a.rotation.matrix() - b.rotation.matrix();
    let dt = a.translation - b.translation;
    dr.norm_squared() + k.0 * dt.norm_squared()
}

/// Block projection of an arbitrary 4×4 matrix onto se(3):
/// `[[½(D₁₁ − D₁₁ᵀ), k·D₁₂], [0, 0]]`.
pub fn proj_se3_k(d: &Matrix4<f64>, k: NormWeight) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    let d11 = d.fixed_view::<3, 3>(0, 0);
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&((d11 - d11.transpose()) * 0.5));
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&(d.fixed_view::<3, 1>(0, 3) * k.0));
    out
}

pub(crate) mod vec3_serde {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vector3::from(a))
    }
}

pub(crate) mod vec6_serde {
    use nalgebra::Vector6;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector6<f64>, s: S) -> Result<S::Ok, S::Error> {
        let a: [f64; 6] = std::array::from_fn(|i| v[i]);
        a.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector6<f64>, D::Error> {
        let a = <[f64; 6]>::deserialize(d)?;
        Ok(Vector6::from(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn random_pose(rng: &mut impl Rng) -> Pose {
        let r = Rotation::from_axis_angle(&random_unit(rng), rng.random_range(-PI..PI)).unwrap();
        let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        Pose::new(r, t)
    }

    #[test]
    fn hat_of_zero_and_z_axis() {
        assert_eq!(hat(&Vector6::zeros()), Matrix4::zeros());
        let m = hat(&Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0));
        let mut expected = Matrix4::zeros();
        expected[(0, 1)] = -1.0;
        expected[(1, 0)] = 1.0;
        assert_eq!(m, expected);
    }

    #[test]
    fn vee_round_trips_and_rejects() {
        assert_eq!(vee(&Matrix4::zeros()).unwrap(), Vector6::zeros());
        let x = Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        assert_eq!(vee(&hat(&x)).unwrap(), x);

        let mut sym = Matrix4::zeros();
        sym[(0, 1)] = 1.0;
        sym[(1, 0)] = 1.0;
        assert_eq!(vee(&sym), Err(GeometryError::NotSe3));
        let mut bottom = Matrix4::zeros();
        bottom[(3, 3)] = 1.0;
        assert_eq!(vee(&bottom), Err(GeometryError::NotSe3));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = Vector6::from_fn(|_, _| rng.random_range(-10.0..10.0));
            assert_eq!(vee(&hat(&x)).unwrap(), x);
        }
    }

    #[test]
    fn axis_angle_examples() {
        let z = Vector3::z();
        let r0 = Rotation::from_axis_angle(&z, 0.0).unwrap();
        assert_eq!(r0, Rotation::identity());
        let r = Rotation::from_axis_angle(&z, FRAC_PI_2).unwrap();
        assert!((r * Vector3::x() - Vector3::y()).norm() < 1e-15);
        assert!(matches!(Rotation::from_axis_angle(&Vector3::new(1.0, 1.0, 0.0), 0.3), Err(GeometryError::BadAxis(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random_unit(&mut rng);
            let alpha = rng.random_range(-PI..PI);
            let r = Rotation::from_axis_angle(&a, alpha).unwrap();
            assert!((r.trace() - (1.0 + 2.0 * alpha.cos())).abs() < 1e-12);
            assert!(r.orthonormality_defect() < 1e-12);
        }
    }

    #[test]
    fn weighted_distance_examples() {
        let k = NormWeight::default();
        let a = Pose::identity();
        assert_eq!(weighted_frob_dist_sq(&a, &a, k), 0.0);
        let b = Pose::from_translation(Vector3::new(0.1, 0.0, 0.0));
        assert!((weighted_frob_dist_sq(&a, &b, k) - 0.05).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let axis = random_unit(&mut rng);
            let alpha = rng.random_range(0.0..PI);
            let c = Pose::from_rotation(Rotation::from_axis_angle(&axis, alpha).unwrap());
            let d = weighted_frob_dist_sq(&a, &c, k);
            assert!((d - 4.0 * (1.0 - alpha.cos())).abs() < 1e-12);
        }
        let quarter = Pose::from_rotation(Rotation::about_x(FRAC_PI_2));
        assert!((weighted_frob_dist_sq(&a, &quarter, k) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_distance_is_a_symmetric_premetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = NormWeight::default();
        for _ in 0..200 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let ab = weighted_frob_dist_sq(&a, &b, k);
            let ba = weighted_frob_dist_sq(&b, &a, k);
            assert!((ab - ba).abs() < IDENTITY_TOL);
            assert!(ab > 0.0);
            assert!(weighted_frob_dist_sq(&a, &a, k) < IDENTITY_TOL);
        }
    }

    #[test]
    fn proj_examples() {
        let k5 = NormWeight::default();
        assert_eq!(proj_se3_k(&Matrix4::zeros(), k5), Matrix4::zeros());

        let mut d = Matrix4::zeros();
        d[(0, 1)] = 2.0;
        d[(1, 0)] = 2.0;
        d[(2, 2)] = 3.0;
        d[(0, 3)] = 1.0;
        d[(3, 3)] = 9.0;
        let p = proj_se3_k(&d, k5);
        assert_eq!(p.fixed_view::<3, 3>(0, 0).amax(), 0.0);
        assert_eq!(p.fixed_view::<3, 1>(0, 3).into_owned(), Vector3::new(5.0, 0.0, 0.0));
        assert_eq!(p.fixed_view::<1, 4>(3, 0).amax(), 0.0);

        let k1 = NormWeight::new(1.0).unwrap();
        let xi = hat(&Vector6::new(0.3, -0.2, 0.1, 1.0, 2.0, 3.0));
        assert_eq!(proj_se3_k(&xi, k1), xi);
    }

    #[test]
    fn proj_output_is_always_in_se3_and_idempotent_at_unit_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let k1 = NormWeight::new(1.0).unwrap();
        for _ in 0..200 {
            let d = Matrix4::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let k = NormWeight::new(rng.random_range(0.1..10.0)).unwrap();
            assert!(vee(&proj_se3_k(&d, k)).is_ok());
            let once = proj_se3_k(&d, k1);
            assert!((proj_se3_k(&once, k1) - once).amax() < IDENTITY_TOL);
        }
    }

    #[test]
    fn exp_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let x = Vector6::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let pose = Pose::exp(&Twist::from_vector(&x));
            let reference = hat(&x).exp();
            assert!((pose.to_matrix() - reference).amax() < 1e-10);
        }
        let small = Twist::new(Vector3::new(1e-10, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0));
        assert!((Pose::exp(&small).to_matrix() - small.hat().exp()).amax() < 1e-12);
    }

    #[test]
    fn long_composition_chains_stay_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let steps: Vec<Pose> = (0..64).map(|_| random_pose(&mut rng)).collect();
        let mut acc = Pose::identity();
        for i in 0..1_000_000 {
            let s = &steps[i % steps.len()];
            acc = if i % 3 == 0 { acc.compose(&s.inverse()) } else { acc.compose(s) };
            // keep translations bounded
            acc.translation *= 0.5;
            if i % 4096 == 0 {
                assert!(acc.rotation.orthonormality_defect() < 1e-8);
            }
        }
        assert!(acc.rotation.orthonormality_defect() < 1e-8);
        assert!((acc.rotation.matrix().determinant() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rotation_validation() {
        assert!(Rotation::from_matrix(Matrix3::identity() * 2.0).is_err());
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Rotation::from_matrix(reflect).is_err());
        let r = Rotation::about_y(0.4);
        let noisy = r.matrix() + Matrix3::from_element(1e-6);
        let fixed = Rotation::from_matrix_unchecked(noisy).renormalized();
        assert!(fixed.orthonormality_defect() < 1e-14);
        assert!((fixed.matrix() - r.matrix()).amax() < 1e-5);
    }

    #[test]
    fn pose_serde_is_row_major() {
        let p = Pose::new(Rotation::about_z(FRAC_PI_2), Vector3::new(1.0, 2.0, 3.0));
        let s = serde_json::to_value(p).unwrap();
        let rot = s["rotation"].as_array().unwrap();
        assert_eq!(rot.len(), 9);
        assert!((rot[1].as_f64().unwrap() + 1.0).abs() < 1e-15);
        let back: Pose = serde_json::from_value(s).unwrap();
        assert!((back.to_matrix() - p.to_matrix()).amax() < 1e-15);
        assert!(serde_json::from_str::<NormWeight>("-1.0").is_err());
    }
}
