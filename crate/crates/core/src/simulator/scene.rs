use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use super::parts::{PartKind, PartModel};
use super::SimulatorError;
use crate::geometry::{PointCloud, RigidPose};
use crate::progress::{cad_height_extent, HeightExtent};

/// Axis-aligned rectangle in the xy plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn centered(x: f64, y: f64, half: f64) -> Self {
        Self {
            min_x: x - half,
            min_y: y - half,
            max_x: x + half,
            max_y: y + half,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn depth(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Vertical cylinder orbiting in the xy plane, standing in for a nozzle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccluderSpec {
    pub radius: f64,
    pub height: f64,
    /// Gap between the powder surface and the cylinder's bottom.
    pub clearance: f64,
    pub orbit_center: [f64; 2],
    pub orbit_radius: f64,
    /// Radians per second.
    pub angular_rate: f64,
    /// Angle on the orbit at time zero, radians.
    pub phase: f64,
}

impl OccluderSpec {
    pub fn center_at(&self, time: f64) -> [f64; 2] {
        let a = self.phase + self.angular_rate * time;
        [
            self.orbit_center[0] + self.orbit_radius * a.cos(),
            self.orbit_center[1] + self.orbit_radius * a.sin(),
        ]
    }
}

/// Knobs of the rendering pipeline that are not part of the scene content.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Keep only the highest point per xy cell.
    pub cull: bool,
    pub cull_cell: f64,
    /// Powder samples one point per cell of this size.
    pub powder_spacing: f64,
    /// Powder height jitter is uniform in `[-roughness, roughness]`.
    pub roughness: f64,
    /// Powder is left out within this horizontal distance of exposed part points.
    pub footprint_clearance: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            cull: true,
            cull_cell: 0.002,
            powder_spacing: 0.002,
            roughness: 0.001,
            footprint_clearance: 0.003,
        }
    }
}

/// One part in a box of powder. Lengths in meters.
#[derive(Debug, Clone)]
pub struct Scene {
    pub part: Arc<PartModel>,
    /// Ground-truth pose when no motion script is given.
    pub part_pose: RigidPose,
    pub powder_height: f64,
    pub powder_extent: Rect,
    pub noise_sigma: f64,
    pub occluder: Option<OccluderSpec>,
    pub seed: u64,
    pub render: RenderOptions,
}

/// Default half width of the powder box around the part, meters.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 0.15;

impl Scene {
    /// Part fully exposed (powder at its lowest point), 2 mm noise, no occluder.
    pub fn new(part: Arc<PartModel>, part_pose: RigidPose, seed: u64) -> Self {
        let t = part_pose.translation();
        let mut scene = Self {
            powder_extent: Rect::centered(t.x, t.y, DEFAULT_BOX_HALF_WIDTH),
            part,
            part_pose,
            powder_height: 0.0,
            noise_sigma: 0.002,
            occluder: None,
            seed,
            render: RenderOptions::default(),
        };
        scene.powder_height = scene.powder_height_for(1.0);
        scene
    }

    /// Sets the powder height so that `visibility` of the part height is exposed.
    pub fn with_visibility(mut self, visibility: f64) -> Self {
        self.powder_height = self.powder_height_for(visibility);
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_occluder(mut self, occluder: Option<OccluderSpec>) -> Self {
        self.occluder = occluder;
        self
    }

    /// Model cloud for the tracker.
    pub fn cad(&self) -> &Arc<PointCloud> {
        &self.part.cad
    }

    /// Height extent of the part at `pose`.
    pub fn height_extent(&self, pose: &RigidPose) -> HeightExtent {
        cad_height_extent(&self.part.scene_cloud, pose).expect("part models have a height")
    }

    pub fn powder_height_for(&self, visibility: f64) -> f64 {
        self.height_extent(&self.part_pose).height_at(visibility)
    }

    /// An occluder orbiting the part just outside its footprint so it
    /// shadows the part's rim on every pass.
    pub fn default_occluder(&self) -> OccluderSpec {
        let t = self.part_pose.translation();
        let b = self.part.mesh.bounds().expect("part meshes are non-empty");
        let reach = (b.max.x - b.min.x).max(b.max.y - b.min.y) / 2.0;
        OccluderSpec {
            radius: 0.015,
            height: 0.15,
            clearance: 0.005,
            orbit_center: [t.x, t.y],
            orbit_radius: reach + 0.005,
            angular_rate: 45f64.to_radians(),
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimulatorError> {
        let bad = |m: &str| Err(SimulatorError::InvalidScene(m.to_string()));
        let ext = self.height_extent(&self.part_pose);
        if !self.powder_height.is_finite()
            || self.powder_height < ext.h_min - 0.05
            || self.powder_height > ext.h_max + 0.05
        {
            return bad("powder height must lie within 5 cm of the part's height range");
        }
        let r = &self.powder_extent;
        if !(r.width() > 0.0 && r.depth() > 0.0) {
            return bad("powder extent must have positive width and depth");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise sigma must be >= 0");
        }
        let o = &self.render;
        if !(o.cull_cell > 0.0 && o.powder_spacing > 0.0 && o.roughness >= 0.0 && o.footprint_clearance >= 0.0) {
            return bad("render cell sizes must be > 0");
        }
        if let Some(occ) = &self.occluder {
            if !(occ.radius > 0.0) || !(occ.height > 0.0) {
                return bad("occluder radius and height must be > 0");
            }
        }
        Ok(())
    }
}

/// Scene file. Keys carry their units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub seed: u64,
    /// Procedural part: cube, cup, propeller, owl or pipe.
    #[serde(default)]
    pub part: Option<PartKind>,
    /// OBJ mesh in meters; used instead of `part` when given. Relative paths
    /// resolve against the config file's directory.
    #[serde(default)]
    pub mesh: Option<String>,
    /// Fraction of the part height above the powder.
    #[serde(default)]
    pub visibility: Option<f64>,
    /// Absolute powder height, cm; overrides `visibility`.
    #[serde(default)]
    pub powder_height_cm: Option<f64>,
    #[serde(default = "default_noise_mm")]
    pub noise_sigma_mm: f64,
    #[serde(default)]
    pub pose: PoseConfig,
    #[serde(default)]
    pub powder: PowderConfig,
    #[serde(default)]
    pub occluder: Option<OccluderConfig>,
    #[serde(default)]
    pub render: RenderConfig,
}

fn default_noise_mm() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseConfig {
    pub translation_cm: [f64; 3],
    pub rpy_deg: [f64; 3],
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            translation_cm: [0.0, 0.0, 5.0],
            rpy_deg: [0.0, 0.0, 0.0],
        }
    }
}

impl PoseConfig {
    pub fn pose(&self) -> RigidPose {
        RigidPose::from_rpy_deg(self.rpy_deg, Vector3::from(self.translation_cm) / 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowderConfig {
    /// `[min_x, min_y, max_x, max_y]`, cm. Defaults to a 30 cm square around the part.
    pub extent_cm: Option<[f64; 4]>,
    pub spacing_mm: f64,
    pub roughness_mm: f64,
    pub footprint_clearance_mm: f64,
}

impl Default for PowderConfig {
    fn default() -> Self {
        let d = RenderOptions::default();
        Self {
            extent_cm: None,
            spacing_mm: d.powder_spacing * 1e3,
            roughness_mm: d.roughness * 1e3,
            footprint_clearance_mm: d.footprint_clearance * 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccluderConfig {
    pub radius_cm: f64,
    pub height_cm: f64,
    pub clearance_cm: f64,
    /// Defaults to the part's xy position.
    pub orbit_center_cm: Option<[f64; 2]>,
    /// Defaults to just outside the part's footprint.
    pub orbit_radius_cm: Option<f64>,
    pub angular_rate_deg_s: f64,
    pub phase_deg: f64,
}

impl Default for OccluderConfig {
    fn default() -> Self {
        Self {
            radius_cm: 1.5,
            height_cm: 15.0,
            clearance_cm: 0.5,
            orbit_center_cm: None,
            orbit_radius_cm: None,
            angular_rate_deg_s: 45.0,
            phase_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub cull: bool,
    pub cull_cell_mm: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        let d = RenderOptions::default();
        Self {
            cull: d.cull,
            cull_cell_mm: d.cull_cell * 1e3,
        }
    }
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimulatorError> {
        toml::from_str(text).map_err(|e| SimulatorError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, std::path::PathBuf), SimulatorError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimulatorError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_toml(&text)?, base))
    }

    /// Builds the scene; `base_dir` resolves a relative mesh path.
    pub fn build(&self, base_dir: &Path) -> Result<Scene, SimulatorError> {
        let part = match (&self.mesh, self.part) {
            (Some(mesh), _) => {
                let path = base_dir.join(mesh);
                let mesh = TriangleMesh::load_obj(&path)?;
                let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
                PartModel::from_mesh(&name, mesh, vec![Matrix3::identity()], 1.0, self.seed)?
            }
            (None, Some(kind)) => PartModel::procedural(kind),
            (None, None) => return Err(SimulatorError::InvalidScene("scene needs `part` or `mesh`".into())),
        };
        let mut scene = Scene::new(Arc::new(part), self.pose.pose(), self.seed).with_noise(self.noise_sigma_mm / 1e3);
        if let Some(v) = self.visibility {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimulatorError::InvalidScene(format!("visibility {v} outside [0, 1]")));
            }
            scene = scene.with_visibility(v);
        }
        if let Some(h) = self.powder_height_cm {
            scene.powder_height = h / 100.0;
        }
        if let Some([x0, y0, x1, y1]) = self.powder.extent_cm {
            scene.powder_extent = Rect {
                min_x: x0 / 100.0,
                min_y: y0 / 100.0,
                max_x: x1 / 100.0,
                max_y: y1 / 100.0,
            };
        }
        scene.render = RenderOptions {
            cull: self.render.cull,
            cull_cell: self.render.cull_cell_mm / 1e3,
            powder_spacing: self.powder.spacing_mm / 1e3,
            roughness: self.powder.roughness_mm / 1e3,
            footprint_clearance: self.powder.footprint_clearance_mm / 1e3,
        };
        if let Some(o) = &self.occluder {
            let mut occ = scene.default_occluder();
            occ.radius = o.radius_cm / 100.0;
            occ.height = o.height_cm / 100.0;
            occ.clearance = o.clearance_cm / 100.0;
            if let Some([x, y]) = o.orbit_center_cm {
                occ.orbit_center = [x / 100.0, y / 100.0];
            }
            if let Some(r) = o.orbit_radius_cm {
                occ.orbit_radius = r / 100.0;
            }
            occ.angular_rate = o.angular_rate_deg_s.to_radians();
            occ.phase = o.phase_deg.to_radians();
            scene.occluder = Some(occ);
        }
        scene.validate()?;
        Ok(scene)
    }
}

/// Lowest point of the part at `pose`, for placing parts on the box floor.
pub fn resting_height(part: &PartModel, pose: &RigidPose) -> f64 {
    part.scene_cloud
        .iter()
        .map(|p| pose.transform_point(p).z)
        .fold(f64::INFINITY, f64::min)
}

/// Pose with the given rotation whose lowest point sits at `floor`, centered at `(x, y)`.
pub fn place_on_floor(part: &PartModel, rpy_deg: [f64; 3], x: f64, y: f64, floor: f64) -> RigidPose {
    let rotated = RigidPose::from_rpy_deg(rpy_deg, Vector3::zeros());
    let low = resting_height(part, &rotated);
    rotated.with_translation(Vector3::new(x, y, floor - low))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visibility_sets_powder_height() {
        let part = Arc::new(PartModel::procedural(PartKind::Cube));
        let scene = Scene::new(part, RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.05)), 1);
        assert!((scene.powder_height - 0.02).abs() < 1e-12);
        let s = scene.clone().with_visibility(0.6);
        // 6 cm cube centered at 5 cm: top at 8 cm, 60% exposed leaves powder at 4.4 cm.
        assert!((s.powder_height - 0.044).abs() < 1e-12);
        s.validate().unwrap();
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
seed = 3
part = "owl"
visibility = 0.4
noise_sigma_mm = 1.0
[pose]
translation_cm = [1.0, 2.0, 4.0]
rpy_deg = [0.0, 0.0, 30.0]
[occluder]
radius_cm = 2.0
[render]
cull = false
"#;
        let cfg = SceneConfig::from_toml(text).unwrap();
        let scene = cfg.build(Path::new(".")).unwrap();
        assert_eq!(scene.part.name, "owl");
        assert_eq!(scene.seed, 3);
        assert_eq!(scene.noise_sigma, 0.001);
        assert!(!scene.render.cull);
        let occ = scene.occluder.unwrap();
        assert_eq!(occ.radius, 0.02);
        assert!((occ.orbit_center[0] - 0.01).abs() < 1e-15);
        assert!((scene.powder_extent.min_x + 0.14).abs() < 1e-12);
        assert!(SceneConfig::from_toml("part = \"cube\"\nbogus = 1\n").is_err());
        assert!(SceneConfig::from_toml("seed = 1\n").unwrap().build(Path::new(".")).is_err());
    }

    #[test]
    fn floor_placement() {
        let part = PartModel::procedural(PartKind::Pipe);
        let pose = place_on_floor(&part, [10.0, 20.0, 30.0], 0.01, 0.0, 0.02);
        assert!((resting_height(&part, &pose) - 0.02).abs() < 1e-12);
    }
}
