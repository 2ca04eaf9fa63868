//! Core 3D types and registration primitives.
//!
//! Everything here is a pure function over immutable inputs. Poses map
//! model-frame points into the world frame (`p_world = R * p_model + t`).

mod cloud;
mod icp;
mod kabsch;
mod kdtree;
mod pose;

pub use cloud::{Aabb, PointCloud};
pub use icp::{icp_register, icp_register_indexed, IcpParams, IcpResult};
pub use kabsch::kabsch_align;
pub use kdtree::{KdTree, Neighbor, NearestNeighborIndex};
pub use pose::{compose, rotation_angle_between, transform_cloud, RigidPose, ORTHONORMAL_TOLERANCE};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("rotation is not orthonormal with determinant +1 (error {error:.3e})")]
    InvalidRotation { error: f64 },
    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(String),
    #[error("every correspondence was rejected at iteration {iteration}")]
    NoCorrespondences { iteration: usize },
    #[error("{what} needs at least {required} points, got {actual}")]
    TooFewPoints {
        what: &'static str,
        required: usize,
        actual: usize,
    },
}
