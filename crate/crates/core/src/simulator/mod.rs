//! Synthetic scans of parts buried in powder, with ground truth.
//!
//! A [`Scene`] holds one part at a known pose in a box of powder. Rendering
//! buries the part below the powder surface, adds the powder plane around
//! it, optionally carves out a moving occluder, keeps only the highest point
//! per 2 mm cell as seen from above and finally adds Gaussian sensor noise.
//! Every random draw comes from the scene seed, so frames are reproducible
//! and can be rendered in any order.

mod io;
mod mesh;
mod motion;
mod parts;
mod render;
mod scene;

use std::path::Path;

use thiserror::Error;

pub use io::{format_points, frame_file_name, parse_points, read_sequence, write_sequence, MANIFEST};
pub use mesh::{sample_mesh, sample_surface, TriangleMesh};
pub use motion::{interpolate, Keyframe, KeyframeConfig, MotionScript, MotionScriptConfig};
pub use parts::{PartKind, PartModel, CAD_STRIDE, SCENE_DENSITY};
pub use render::{generate_sequence, render_frame, speedup_resample, top_down_cull, Label, ScanFrame};
pub use scene::{
    place_on_floor, resting_height, OccluderConfig, OccluderSpec, PoseConfig, PowderConfig, Rect, RenderConfig,
    RenderOptions, Scene, SceneConfig, DEFAULT_BOX_HALF_WIDTH,
};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },
    #[error("mesh has zero surface area")]
    DegenerateMesh,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid motion script: {0}")]
    InvalidScript(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config: {0}")]
    Config(String),
    #[error("malformed sequence data: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl SimulatorError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SimulatorError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<crate::geometry::GeometryError> for SimulatorError {
    fn from(e: crate::geometry::GeometryError) -> Self {
        SimulatorError::InvalidArgument(e.to_string())
    }
}
