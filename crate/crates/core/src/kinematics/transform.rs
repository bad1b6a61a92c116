//! Rigid transforms in SE(3), stored as a unit quaternion plus a translation.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Tolerance on the quaternion norm accepted by [`RigidTransform::from_parts`].
pub const UNIT_QUATERNION_TOLERANCE: f64 = 1e-9;

/// A rigid transform `x ↦ R·x + t`.
#[derive(Clone, Copy, PartialEq)]
pub struct RigidTransform {
    iso: Isometry3<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("quaternion norm {norm} deviates from 1 by more than {UNIT_QUATERNION_TOLERANCE}")]
pub struct NonUnitQuaternion {
    pub norm: f64,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            iso: Isometry3::identity(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            iso: Isometry3::from_parts(Translation3::from(translation), rotation),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Builds a transform from a `[x, y, z]` translation and a `[w, x, y, z]`
    /// quaternion. The quaternion must already be unit length.
    pub fn from_parts(translation: [f64; 3], wxyz: [f64; 4]) -> Result<Self, NonUnitQuaternion> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_QUATERNION_TOLERANCE {
            return Err(NonUnitQuaternion { norm });
        }
        Ok(Self::new(UnitQuaternion::new_unchecked(q), Vector3::from(translation)))
    }

    /// URDF-style origin: translation plus fixed-axis roll/pitch/yaw
    /// (`R = Rz(yaw)·Ry(pitch)·Rx(roll)`).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
            Vector3::from(xyz),
        )
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        match Unit::try_new(*axis, f64::EPSILON) {
            Some(unit) => Self::from_rotation(UnitQuaternion::from_axis_angle(&unit, angle)),
            None => Self::identity(),
        }
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.iso.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.iso.translation.vector
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.iso
    }

    pub fn translation_array(&self) -> [f64; 3] {
        let t = self.translation();
        [t.x, t.y, t.z]
    }

    /// Quaternion as `[w, x, y, z]`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.iso.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.iso.rotation.euler_angles();
        [r, p, y]
    }

    pub fn inverse(&self) -> Self {
        Self {
            iso: self.iso.inverse(),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            iso: self.iso * other.iso,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.iso.transform_point(&Point3::from(*p)).coords
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.iso.rotation * v
    }

    /// Rotation angle in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        self.iso.rotation.angle()
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.iso.rotation.quaternion().norm()
    }

    /// Translation distance and rotation angle between two transforms.
    pub fn distance_to(&self, other: &RigidTransform) -> (f64, f64) {
        let dp = (self.translation() - other.translation()).norm();
        let dr = self.iso.rotation.angle_to(&other.iso.rotation);
        (dp, dr)
    }
}

/// Axis-angle 3-vector `θ·n` of a rotation via the quaternion log map.
///
/// The quaternion is sign-normalized to `w ≥ 0` so the result has angle in `[0, π]`.
pub fn rotation_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let mut q = *q.quaternion();
    if q.w < 0.0 {
        q = -q;
    }
    let v = q.imag();
    let s = v.norm();
    if s < 1e-12 {
        // first-order expansion: log(q) ≈ 2·v / w
        return v * (2.0 / q.w);
    }
    let angle = 2.0 * s.atan2(q.w);
    v * (angle / s)
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

impl Mul<&RigidTransform> for &RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        self.compose(rhs)
    }
}

impl fmt::Debug for RigidTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.translation_array();
        let q = self.quaternion_wxyz();
        write!(
            f,
            "RigidTransform(t: [{}, {}, {}], q: [{}, {}, {}, {}])",
            t[0], t[1], t[2], q[0], q[1], q[2], q[3]
        )
    }
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    translation: [f64; 3],
    quaternion: [f64; 4],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TransformRepr {
            translation: self.translation_array(),
            quaternion: self.quaternion_wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TransformRepr::deserialize(deserializer)?;
        RigidTransform::from_parts(repr.translation, repr.quaternion).map_err(serde::de::Error::custom)
    }
}
