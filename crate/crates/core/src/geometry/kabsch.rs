use nalgebra::{Matrix3, Point3, Vector3};

use super::{GeometryError, RigidPose};

/// Relative singular-value floor below which the cross-covariance is treated
/// as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares rigid transform mapping `source[i]` onto `target[i]`.
///
/// Minimizes `sum |R s_i + t - t_i|^2` via SVD of the cross-covariance, with
/// the reflection case corrected so `det(R) = +1`.
pub fn kabsch_align(source: &[Point3<f64>], target: &[Point3<f64>]) -> Result<RigidPose, GeometryError> {
    if source.len() != target.len() {
        return Err(GeometryError::DegenerateCorrespondences(format!(
            "{} source points vs {} target points",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(GeometryError::DegenerateCorrespondences(format!(
            "{} correspondences, need at least 3",
            source.len()
        )));
    }
    let n = source.len() as f64;
    let cs: Vector3<f64> = source.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let ct: Vector3<f64> = target.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;

    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s.coords - cs) * (t.coords - ct).transpose();
    }

    let svd = h.svd(true, true);
    let mut sv = svd.singular_values;
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= RANK_TOLERANCE * sv[0] {
        return Err(GeometryError::DegenerateCorrespondences(
            "cross-covariance rank below 2 (collinear or coincident points)".into(),
        ));
    }
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let translation = ct - rotation * cs;
    RigidPose::new(rotation, translation)
}
