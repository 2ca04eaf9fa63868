//! Occlusion-robust pose tracking for powder-covered parts.
//!
//! The crate is organized the way the data flows:
//!
//! - [`geometry`]: point clouds, SE(3) poses, nearest-neighbor search,
//!   closed-form rigid alignment and point-to-point ICP.
//! - [`tracker`]: the three template strategies (full model, per-frame
//!   refresh, conditional refresh) and the per-part tracking state.
//! - [`progress`]: part/powder segmentation, powder contour extraction and
//!   the height-ratio progress estimate.
//! - [`simulator`]: synthetic scan sequences of parts buried in powder with
//!   ground truth.
//! - [`harness`]: experiment protocols, metrics and reports.

pub mod geometry;
pub mod harness;
pub mod progress;
pub mod simulator;
pub mod tracker;

pub use geometry::{PointCloud, RigidPose};
