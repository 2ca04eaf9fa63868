//! The five procedural test parts and their sampled clouds.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::mesh::{sample_surface, MeshBuilder, TriangleMesh};
use super::SimulatorError;
use crate::geometry::PointCloud;

/// Density of the cloud the simulator renders from, points per cm².
pub const SCENE_DENSITY: f64 = 40.0;
/// Every n-th scene sample goes into the tracker's model cloud (about 6.7 per cm²).
pub const CAD_STRIDE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Cube,
    Cup,
    Propeller,
    Owl,
    Pipe,
}

impl PartKind {
    pub const ALL: [PartKind; 5] = [PartKind::Cube, PartKind::Cup, PartKind::Propeller, PartKind::Owl, PartKind::Pipe];

    pub fn name(&self) -> &'static str {
        match self {
            PartKind::Cube => "cube",
            PartKind::Cup => "cup",
            PartKind::Propeller => "propeller",
            PartKind::Owl => "owl",
            PartKind::Pipe => "pipe",
        }
    }

    /// Template distance threshold suited to the part, cm. Thin, strongly
    /// curved parts use a tighter value.
    pub fn recommended_xi_cm(&self) -> f64 {
        match self {
            PartKind::Propeller | PartKind::Pipe => 0.8,
            _ => 1.0,
        }
    }

    /// Model-frame triangle mesh, meters, centered on its bounding box
    /// (the propeller stays centered on its hub axis).
    pub fn mesh(&self) -> TriangleMesh {
        let mut mesh = match self {
            PartKind::Cube => cube_mesh(),
            PartKind::Cup => cup_mesh(),
            PartKind::Propeller => propeller_mesh(),
            PartKind::Owl => owl_mesh(),
            PartKind::Pipe => pipe_mesh(),
        };
        let b = mesh.bounds().expect("procedural meshes are non-empty");
        let mut center = nalgebra::center(&b.min, &b.max).coords;
        if *self == PartKind::Propeller {
            center.x = 0.0;
            center.y = 0.0;
        }
        mesh.translate(&-center);
        mesh
    }

    /// Model-frame rotations that map the part onto itself, identity first.
    pub fn symmetries(&self) -> Vec<Matrix3<f64>> {
        match self {
            PartKind::Cube => cube_rotations(),
            PartKind::Propeller => (0..3)
                .map(|k| *Rotation3::from_axis_angle(&Vector3::z_axis(), k as f64 * TAU / 3.0).matrix())
                .collect(),
            _ => vec![Matrix3::identity()],
        }
    }
}

impl std::fmt::Display for PartKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PartKind {
    type Err = SimulatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PartKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SimulatorError::InvalidScene(format!("unknown part '{s}'")))
    }
}

/// A part with its mesh, the dense cloud scans are rendered from and the
/// sparser model cloud handed to the tracker.
#[derive(Debug, Clone)]
pub struct PartModel {
    pub name: String,
    pub mesh: TriangleMesh,
    /// Surface samples plus mesh vertices, so its extent equals the mesh bounds.
    pub scene_cloud: Arc<PointCloud>,
    /// Every [`CAD_STRIDE`]-th surface sample plus the mesh vertices; a
    /// subset of `scene_cloud`.
    pub cad: Arc<PointCloud>,
    pub symmetries: Vec<Matrix3<f64>>,
    pub xi_cm: f64,
}

impl PartModel {
    pub fn procedural(kind: PartKind) -> Self {
        Self::from_mesh(kind.name(), kind.mesh(), kind.symmetries(), kind.recommended_xi_cm(), kind as u64 + 1)
            .expect("procedural meshes have area")
    }

    pub fn from_mesh(
        name: &str,
        mesh: TriangleMesh,
        symmetries: Vec<Matrix3<f64>>,
        xi_cm: f64,
        seed: u64,
    ) -> Result<Self, SimulatorError> {
        let samples = sample_surface(&mesh, SCENE_DENSITY, seed)?;
        let vertices = mesh.vertex_cloud();
        let mut cad: PointCloud = samples.iter().step_by(CAD_STRIDE).copied().collect::<Vec<_>>().try_into()?;
        cad.extend_from(&vertices);
        let mut scene = samples;
        scene.extend_from(&vertices);
        Ok(Self {
            name: name.to_string(),
            mesh,
            scene_cloud: Arc::new(scene),
            cad: Arc::new(cad),
            symmetries,
            xi_cm,
        })
    }
}

fn cube_mesh() -> TriangleMesh {
    let mut b = MeshBuilder::default();
    b.cuboid(Point3::origin(), Vector3::repeat(0.03), &Rotation3::identity());
    b.build()
}

fn circle(radius: f64, z: f64, segments: usize) -> Vec<Point3<f64>> {
    (0..segments)
        .map(|j| {
            let a = j as f64 * TAU / segments as f64;
            Point3::new(radius * a.cos(), radius * a.sin(), z)
        })
        .collect()
}

/// Closed tube of circular cross-section following `path`.
fn tube(b: &mut MeshBuilder, path: &[Point3<f64>], radius: f64, sides: usize) {
    let n = path.len();
    let rings: Vec<Vec<Point3<f64>>> = (0..n)
        .map(|i| {
            let tangent = (path[(i + 1).min(n - 1)] - path[i.saturating_sub(1)]).normalize();
            let reference = if tangent.y.abs() < 0.9 { Vector3::y() } else { Vector3::x() };
            let u = tangent.cross(&reference).normalize();
            let v = tangent.cross(&u);
            (0..sides)
                .map(|j| {
                    let a = j as f64 * TAU / sides as f64;
                    path[i] + radius * (a.cos() * u + a.sin() * v)
                })
                .collect()
        })
        .collect();
    let ids = b.loft(&rings, true);
    b.cap(path[0], &ids[0]);
    b.cap(path[n - 1], &ids[n - 1]);
}

fn cup_mesh() -> TriangleMesh {
    let (r_out, wall, height, floor, seg) = (0.03, 0.004, 0.07, 0.006, 40);
    let r_in = r_out - wall;
    let mut b = MeshBuilder::default();
    let rings = b.loft(
        &[
            circle(r_out, 0.0, seg),
            circle(r_out, height, seg),
            circle(r_in, height, seg),
            circle(r_in, floor, seg),
        ],
        true,
    );
    b.cap(Point3::new(0.0, 0.0, 0.0), &rings[0]);
    b.cap(Point3::new(0.0, 0.0, floor), &rings[3]);

    // Handle: half ring on the +x side.
    let (zc, rh) = (0.036, 0.02);
    let path: Vec<Point3<f64>> = (0..=16)
        .map(|k| {
            let a = -FRAC_PI_2 + PI * k as f64 / 16.0;
            Point3::new(r_out - 0.002 + rh * a.cos(), 0.0, zc + rh * a.sin())
        })
        .collect();
    tube(&mut b, &path, 0.004, 10);
    b.build()
}

fn propeller_mesh() -> TriangleMesh {
    let (hub_r, hub_h, seg) = (0.012, 0.05, 48);
    let mut b = MeshBuilder::default();
    let rings = b.loft(&[circle(hub_r, 0.0, seg), circle(hub_r, hub_h, seg)], true);
    b.cap(Point3::new(0.0, 0.0, 0.0), &rings[0]);
    b.cap(Point3::new(0.0, 0.0, hub_h), &rings[1]);
    let half = Vector3::new(0.022, 0.009, 0.0015);
    for k in 0..3 {
        let yaw = FRAC_PI_2 + k as f64 * TAU / 3.0;
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), 30f64.to_radians());
        let radial = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw) * Vector3::x();
        let center = Point3::new(0.0, 0.0, 0.6 * hub_h) + radial * (hub_r + half.x - 0.002);
        b.cuboid(center, half, &rot);
    }
    b.build()
}

fn cone(b: &mut MeshBuilder, base: Point3<f64>, apex: Point3<f64>, radius: f64, sides: usize) {
    let axis = (apex - base).normalize();
    let reference = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = axis.cross(&reference).normalize();
    let v = axis.cross(&u);
    let ring: Vec<Point3<f64>> = (0..sides)
        .map(|j| {
            let a = j as f64 * TAU / sides as f64;
            base + radius * (a.cos() * u + a.sin() * v)
        })
        .collect();
    let ids: Vec<u32> = ring.iter().map(|p| b.vertex(*p)).collect();
    b.cap(apex, &ids);
    b.cap(base, &ids);
}

fn owl_mesh() -> TriangleMesh {
    let (rx, ry, rz, zc) = (0.027, 0.018, 0.032, 0.032);
    let (stacks, slices) = (20, 32);
    // Body: ellipsoid cut flat near the bottom so the part stands.
    let lowest = -1.2f64;
    let rings: Vec<Vec<Point3<f64>>> = (0..stacks)
        .map(|i| {
            let lat = lowest + (FRAC_PI_2 - lowest) * i as f64 / stacks as f64;
            (0..slices)
                .map(|j| {
                    let lon = j as f64 * TAU / slices as f64;
                    Point3::new(rx * lat.cos() * lon.cos(), ry * lat.cos() * lon.sin(), zc + rz * lat.sin())
                })
                .collect()
        })
        .collect();
    let mut b = MeshBuilder::default();
    let ids = b.loft(&rings, true);
    b.cap(Point3::new(0.0, 0.0, zc + rz * lowest.sin()), &ids[0]);
    b.cap(Point3::new(0.0, 0.0, zc + rz), &ids[stacks - 1]);
    // Ears and beak break every rotational symmetry.
    for s in [-1.0, 1.0] {
        cone(
            &mut b,
            Point3::new(s * 0.013, 0.0, zc + 0.025),
            Point3::new(s * 0.022, -0.003, zc + 0.046),
            0.008,
            12,
        );
    }
    cone(&mut b, Point3::new(0.0, ry - 0.002, zc + 0.012), Point3::new(0.0, ry + 0.012, zc + 0.008), 0.006, 12);
    // Tail on the back, low down.
    cone(&mut b, Point3::new(0.0, -ry + 0.003, zc - 0.012), Point3::new(0.0, -ry - 0.012, zc - 0.022), 0.007, 12);
    b.build()
}

fn pipe_mesh() -> TriangleMesh {
    let (bend_r, straight_a, straight_b) = (0.03, 0.045, 0.03);
    let mut path = Vec::new();
    for k in 0..=6 {
        path.push(Point3::new(-straight_a + straight_a * k as f64 / 6.0, 0.0, 0.0));
    }
    for k in 1..=12 {
        let a = FRAC_PI_2 * k as f64 / 12.0;
        path.push(Point3::new(bend_r * a.sin(), 0.0, bend_r * (1.0 - a.cos())));
    }
    for k in 1..=4 {
        path.push(Point3::new(bend_r, 0.0, bend_r + straight_b * k as f64 / 4.0));
    }
    let mut b = MeshBuilder::default();
    tube(&mut b, &path, 0.012, 20);
    // Oblong flange on the upright end, so the top view is not a plain ring.
    b.cuboid(
        Point3::new(bend_r, 0.0, bend_r + straight_b - 0.003),
        Vector3::new(0.016, 0.024, 0.003),
        &Rotation3::identity(),
    );
    b.build()
}

/// The 24 proper rotations of a cube: signed permutation matrices with determinant +1.
fn cube_rotations() -> Vec<Matrix3<f64>> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        for signs in 0..8 {
            let mut m = Matrix3::zeros();
            for (row, &col) in p.iter().enumerate() {
                m[(row, col)] = if signs & (1 << row) == 0 { 1.0 } else { -1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out.sort_by_key(|m| m != &Matrix3::identity());
    out
}
