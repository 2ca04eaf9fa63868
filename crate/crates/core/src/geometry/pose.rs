use nalgebra::{Matrix3, Point3, Rotation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, PointCloud};

/// Maximum tolerated `|R^T R - I|` (max-abs entry) for a valid rotation.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

/// Drift above which composed rotations are projected back onto SO(3).
const REORTHONORMALIZE_THRESHOLD: f64 = 1e-12;

/// Element of SE(3): `p' = rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRepr", try_from = "PoseRepr")]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Row-major wire form used by config and log files.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<RigidPose> for PoseRepr {
    fn from(p: RigidPose) -> Self {
        let r = &p.rotation;
        PoseRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl TryFrom<PoseRepr> for RigidPose {
    type Error = GeometryError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        let flat: Vec<f64> = r.rotation.iter().flatten().copied().collect();
        RigidPose::new(Matrix3::from_row_slice(&flat), Vector3::from(r.translation))
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates the rotation against [`ORTHONORMAL_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let error = orthonormality_error(&rotation);
        let finite = rotation.iter().chain(translation.iter()).all(|v| v.is_finite());
        if !finite || error > ORTHONORMAL_TOLERANCE || rotation.determinant() <= 0.0 {
            return Err(GeometryError::InvalidRotation {
                error: if finite { error } else { f64::INFINITY },
            });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds a pose from a unit rotation axis and an angle in radians.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    /// Roll, pitch, yaw in degrees (applied as yaw * pitch * roll).
    pub fn from_rpy_deg(rpy: [f64; 3], translation: Vector3<f64>) -> Self {
        let r = Rotation3::from_euler_angles(
            rpy[0].to_radians(),
            rpy[1].to_radians(),
            rpy[2].to_radians(),
        );
        Self {
            rotation: *r.matrix(),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *q.to_rotation_matrix().matrix(),
            translation,
        }
    }

    /// Uniformly random rotation; translation uniform in `[-scale, scale]^3`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self {
        // Shoemake's uniform quaternion sampling.
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let tau = std::f64::consts::TAU;
        let q = nalgebra::Quaternion::new(
            u1.sqrt() * (tau * u3).cos(),
            (1.0 - u1).sqrt() * (tau * u2).sin(),
            (1.0 - u1).sqrt() * (tau * u2).cos(),
            u1.sqrt() * (tau * u3).sin(),
        );
        let t = Vector3::new(
            rng.random_range(-scale..=scale),
            rng.random_range(-scale..=scale),
            rng.random_range(-scale..=scale),
        );
        Self::from_quaternion(&UnitQuaternion::from_quaternion(q), t)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }

    pub fn with_translation(&self, translation: Vector3<f64>) -> Self {
        Self {
            rotation: self.rotation,
            translation,
        }
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self * other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> Self {
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_error(&rotation) > REORTHONORMALIZE_THRESHOLD {
            rotation = project_to_so3(&rotation);
        }
        Self {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Max-abs entry of `R^T R - I`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.rotation)
    }

    /// Euclidean distance between the translation parts, meters.
    pub fn translation_distance(&self, other: &RigidPose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Row-major rotation followed by translation, as stored in logs.
    pub fn to_row_major(&self) -> ([f64; 9], [f64; 3]) {
        let r = &self.rotation;
        (
            [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            [self.translation.x, self.translation.y, self.translation.z],
        )
    }

    pub fn from_row_major(rotation: &[f64; 9], translation: &[f64; 3]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_row_slice(rotation), Vector3::from(*translation))
    }
}

fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Nearest rotation in the Frobenius sense (polar decomposition).
pub(crate) fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

pub fn transform_cloud(cloud: &PointCloud, pose: &RigidPose) -> PointCloud {
    PointCloud::from_vec_unchecked(cloud.iter().map(|p| pose.transform_point(p)).collect())
}

/// `a * b`: the result applies `b` first, then `a`.
pub fn compose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.compose(b)
}

/// Geodesic angle between two orientations, degrees in `[0, 180]`.
///
/// Evaluated as `atan2(sin, cos)` of the relative rotation, which equals
/// `acos((tr(Ra^T Rb) - 1) / 2)` without the precision loss of `acos` near 0.
pub fn rotation_angle_between(a: &RigidPose, b: &RigidPose) -> f64 {
    let rel = a.rotation.transpose() * b.rotation;
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let skew = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let sin = (skew.norm() / 2.0).min(1.0);
    sin.atan2(cos).to_degrees().clamp(0.0, 180.0)
}
