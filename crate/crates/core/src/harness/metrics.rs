use nalgebra::Matrix3;

use crate::geometry::{rotation_angle_between, RigidPose};

/// Success thresholds on the final frame.
pub const SUCCESS_ROTATION_DEG: f64 = 15.0;
pub const SUCCESS_TRANSLATION_CM: f64 = 1.5;

/// Errors recorded for frames after tracking was lost.
pub const LOST_ROTATION_DEG: f64 = 180.0;
pub const LOST_TRANSLATION_CM: f64 = 100.0;

/// Geodesic rotation error, degrees.
pub fn rotation_error_deg(estimate: &RigidPose, truth: &RigidPose) -> f64 {
    rotation_angle_between(estimate, truth)
}

/// Smallest geodesic error over the part's symmetry rotations (model frame).
pub fn symmetric_rotation_error_deg(estimate: &RigidPose, truth: &RigidPose, symmetries: &[Matrix3<f64>]) -> f64 {
    if symmetries.is_empty() {
        return rotation_error_deg(estimate, truth);
    }
    symmetries
        .iter()
        .map(|s| {
            let alt = RigidPose::new(truth.rotation() * s, *truth.translation())
                .expect("symmetries are proper rotations");
            rotation_angle_between(estimate, &alt)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Translation error, cm.
pub fn translation_error_cm(estimate: &RigidPose, truth: &RigidPose) -> f64 {
    estimate.translation_distance(truth) * 100.0
}

pub fn is_success(final_r_err_deg: f64, final_t_err_cm: f64) -> bool {
    final_r_err_deg <= SUCCESS_ROTATION_DEG && final_t_err_cm <= SUCCESS_TRANSLATION_CM
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Largest relative deviation of a count series from its first value.
pub fn max_relative_drift(counts: &[usize]) -> f64 {
    let Some(&first) = counts.first() else {
        return 0.0;
    };
    if first == 0 {
        return if counts.iter().all(|&c| c == 0) { 0.0 } else { f64::INFINITY };
    }
    counts
        .iter()
        .map(|&c| (c as f64 - first as f64).abs() / first as f64)
        .fold(0.0, f64::max)
}
