//! Point-to-point ICP with distance-based correspondence rejection.
//!
//! The iteration trace records a truncated RMSE: every source point
//! contributes `min(d, cutoff)^2`. That objective is non-increasing under
//! the alternate-and-align loop even when the inlier set changes between
//! iterations, which is what makes the convergence test well founded.

use nalgebra::Point3;

use super::{kabsch_align, GeometryError, NearestNeighborIndex, PointCloud, RigidPose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once the truncated RMSE improves by less than this, meters.
    pub convergence_epsilon: f64,
    /// Pairs farther apart than this are rejected, meters.
    pub correspondence_cutoff: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_epsilon: 1e-6,
            correspondence_cutoff: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps the prior-aligned source onto the target: `final = relative * prior`.
    pub relative_pose: RigidPose,
    /// Truncated RMSE at the returned pose, meters.
    pub final_rmse: f64,
    /// RMSE over inlier pairs only at the returned pose, meters.
    pub inlier_rmse: f64,
    pub inlier_count: usize,
    pub iterations_used: usize,
    pub converged: bool,
    /// Truncated RMSE before the first update and after every iteration.
    pub rmse_trace: Vec<f64>,
}

/// Registers `source` (in its own frame) onto `target` starting from `prior`.
pub fn icp_register(
    source: &PointCloud,
    target: &PointCloud,
    prior: &RigidPose,
    params: &IcpParams,
) -> Result<IcpResult, GeometryError> {
    if target.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            what: "ICP target",
            required: 3,
            actual: target.len(),
        });
    }
    icp_register_indexed(source, &NearestNeighborIndex::new(target), prior, params)
}

struct Matches {
    src: Vec<Point3<f64>>,
    dst: Vec<Point3<f64>>,
    truncated_sq: f64,
    inlier_sq: f64,
}

fn correspond(
    source: &[Point3<f64>],
    index: &NearestNeighborIndex,
    pose: &RigidPose,
    cutoff: f64,
    m: &mut Matches,
) {
    m.src.clear();
    m.dst.clear();
    m.truncated_sq = 0.0;
    m.inlier_sq = 0.0;
    let cutoff_sq = cutoff * cutoff;
    for p in source {
        match index.nearest_within(&pose.transform_point(p), cutoff) {
            Some(nb) => {
                m.src.push(*p);
                m.dst.push(nb.point);
                m.truncated_sq += nb.dist_sq;
                m.inlier_sq += nb.dist_sq;
            }
            None => m.truncated_sq += cutoff_sq,
        }
    }
}

/// Same as [`icp_register`] with a prebuilt index over the target.
pub fn icp_register_indexed(
    source: &PointCloud,
    target: &NearestNeighborIndex,
    prior: &RigidPose,
    params: &IcpParams,
) -> Result<IcpResult, GeometryError> {
    if source.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            what: "ICP source",
            required: 3,
            actual: source.len(),
        });
    }
    if target.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            what: "ICP target",
            required: 3,
            actual: target.len(),
        });
    }
    let n = source.len() as f64;
    let rmse = |sq: f64| (sq / n).sqrt();
    let mut m = Matches {
        src: Vec::with_capacity(source.len()),
        dst: Vec::with_capacity(source.len()),
        truncated_sq: 0.0,
        inlier_sq: 0.0,
    };

    let mut pose = *prior;
    correspond(source, target, &pose, params.correspondence_cutoff, &mut m);
    if m.src.is_empty() {
        return Err(GeometryError::NoCorrespondences { iteration: 0 });
    }
    let mut current = rmse(m.truncated_sq);
    let mut trace = vec![current];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iterations {
        iterations += 1;
        let candidate = kabsch_align(&m.src, &m.dst)?;
        correspond(source, target, &candidate, params.correspondence_cutoff, &mut m);
        if m.src.is_empty() {
            return Err(GeometryError::NoCorrespondences { iteration: iterations });
        }
        let next = rmse(m.truncated_sq);
        trace.push(next);
        pose = candidate;
        let improvement = current - next;
        current = next;
        if improvement < params.convergence_epsilon {
            converged = true;
            break;
        }
    }

    let inlier_count = m.src.len();
    Ok(IcpResult {
        relative_pose: pose.compose(&prior.inverse()),
        final_rmse: current,
        inlier_rmse: (m.inlier_sq / inlier_count as f64).sqrt(),
        inlier_count,
        iterations_used: iterations,
        converged,
        rmse_trace: trace,
    })
}
