//! Triangle meshes: OBJ subset (vertices and triangular faces), surface
//! area and area-weighted surface sampling.

use std::path::Path;

use nalgebra::{Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimulatorError;
use crate::geometry::{Aabb, PointCloud};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, SimulatorError> {
        if let Some(i) = vertices.iter().position(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(SimulatorError::MeshParse {
                line: 0,
                message: format!("vertex {} is not finite", i + 1),
            });
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= vertices.len())) {
            return Err(SimulatorError::MeshParse {
                line: 0,
                message: format!("face {t:?} references a missing vertex"),
            });
        }
        Ok(Self { vertices, triangles })
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Total surface area, square meters.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    /// Bounds of the referenced vertices.
    pub fn bounds(&self) -> Option<Aabb> {
        PointCloud::from_vec_unchecked(self.used_vertices()).aabb()
    }

    fn used_vertices(&self) -> Vec<Point3<f64>> {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        self.vertices
            .iter()
            .zip(used)
            .filter(|(_, u)| *u)
            .map(|(v, _)| *v)
            .collect()
    }

    /// Vertices that belong to at least one triangle, as a cloud.
    pub fn vertex_cloud(&self) -> PointCloud {
        PointCloud::from_vec_unchecked(self.used_vertices())
    }

    pub fn translate(&mut self, offset: &Vector3<f64>) {
        for v in &mut self.vertices {
            *v += offset;
        }
    }

    pub fn rotate(&mut self, rotation: &Rotation3<f64>) {
        for v in &mut self.vertices {
            *v = rotation * *v;
        }
    }

    /// Appends another mesh, reindexing its faces.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    /// Parses vertices (`v x y z`) and faces (`f a b c ...`) of an OBJ file.
    ///
    /// Polygon faces are fan-triangulated, `a/b/c` index forms and negative
    /// (relative) indices are accepted, every other statement is ignored.
    pub fn parse_obj(text: &str) -> Result<Self, SimulatorError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |message: String| SimulatorError::MeshParse { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let coords: Vec<f64> = parts
                        .take(3)
                        .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad coordinate '{s}': {e}"))))
                        .collect::<Result<_, _>>()?;
                    if coords.len() != 3 {
                        return Err(err("vertex needs three coordinates".into()));
                    }
                    if !coords.iter().all(|c| c.is_finite()) {
                        return Err(err("vertex is not finite".into()));
                    }
                    vertices.push(Point3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let idx: Vec<u32> = parts
                        .map(|s| {
                            let head = s.split('/').next().unwrap_or("");
                            let i: i64 = head.parse().map_err(|e| err(format!("bad face index '{s}': {e}")))?;
                            let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                            if i == 0 || resolved < 0 || resolved >= vertices.len() as i64 {
                                return Err(err(format!("face index {i} out of range")));
                            }
                            Ok(resolved as u32)
                        })
                        .collect::<Result<_, _>>()?;
                    if idx.len() < 3 {
                        return Err(err("face needs at least three vertices".into()));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(Self { vertices, triangles })
    }

    pub fn load_obj(path: &Path) -> Result<Self, SimulatorError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimulatorError::io(path, e))?;
        Self::parse_obj(&text)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        out
    }

    pub fn write_obj(&self, path: &Path) -> Result<(), SimulatorError> {
        std::fs::write(path, self.to_obj()).map_err(|e| SimulatorError::io(path, e))
    }
}

/// Area-weighted uniform surface sampling, `density` in points per cm².
///
/// The sample count is `round(area * density)`. Samples are stratified
/// along the cumulative area so every triangle gets its proportional share,
/// then placed uniformly inside the triangle. The same seed gives the same
/// cloud.
pub fn sample_surface(mesh: &TriangleMesh, density: f64, seed: u64) -> Result<PointCloud, SimulatorError> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(SimulatorError::InvalidArgument(format!("density must be > 0, got {density}")));
    }
    let areas: Vec<f64> = (0..mesh.triangles.len()).map(|i| mesh.triangle_area(i)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(SimulatorError::DegenerateMesh);
    }
    let count = (total * 1e4 * density).round() as usize;
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut tri = 0;
    for k in 0..count {
        let target = (k as f64 + rng.random::<f64>()) / count as f64 * total;
        while tri + 1 < cumulative.len() && (cumulative[tri] < target || areas[tri] == 0.0) {
            tri += 1;
        }
        let [a, b, c] = mesh.triangle(tri);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        points.push(Point3::from(a.coords * wa + b.coords * wb + c.coords * wc));
    }
    Ok(PointCloud::from_vec_unchecked(points))
}

/// Loads an OBJ file and samples its surface.
pub fn sample_mesh(path: &Path, density: f64, seed: u64) -> Result<PointCloud, SimulatorError> {
    sample_surface(&TriangleMesh::load_obj(path)?, density, seed)
}

/// Incremental mesh construction used by the procedural parts.
#[derive(Debug, Default)]
pub(crate) struct MeshBuilder {
    mesh: TriangleMesh,
}

impl MeshBuilder {
    pub fn vertex(&mut self, p: Point3<f64>) -> u32 {
        self.mesh.vertices.push(p);
        (self.mesh.vertices.len() - 1) as u32
    }

    pub fn tri(&mut self, a: u32, b: u32, c: u32) {
        self.mesh.triangles.push([a, b, c]);
    }

    pub fn quad(&mut self, a: u32, b: u32, c: u32, d: u32) {
        self.tri(a, b, c);
        self.tri(a, c, d);
    }

    /// Closed box with the given half extents, rotated then moved to `center`.
    pub fn cuboid(&mut self, center: Point3<f64>, half: Vector3<f64>, rotation: &Rotation3<f64>) {
        let mut ids = [0u32; 8];
        for (i, id) in ids.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            let local = Vector3::new(sx * half.x, sy * half.y, sz * half.z);
            *id = self.vertex(center + rotation * local);
        }
        let [a, b, c, d, e, f, g, h] = ids;
        self.quad(a, c, d, b); // bottom
        self.quad(e, f, h, g); // top
        self.quad(a, b, f, e);
        self.quad(c, g, h, d);
        self.quad(a, e, g, c);
        self.quad(b, d, h, f);
    }

    /// Rings of points swept into a tube; `closed` joins last ring to first.
    pub fn loft(&mut self, rings: &[Vec<Point3<f64>>], closed_rings: bool) -> Vec<Vec<u32>> {
        let ids: Vec<Vec<u32>> = rings
            .iter()
            .map(|ring| ring.iter().map(|p| self.vertex(*p)).collect())
            .collect();
        for w in ids.windows(2) {
            let n = w[0].len();
            let segs = if closed_rings { n } else { n - 1 };
            for j in 0..segs {
                let k = (j + 1) % n;
                self.quad(w[0][j], w[0][k], w[1][k], w[1][j]);
            }
        }
        ids
    }

    /// Fan from a new center vertex to a ring.
    pub fn cap(&mut self, center: Point3<f64>, ring: &[u32]) {
        let c = self.vertex(center);
        for j in 0..ring.len() {
            self.tri(c, ring[j], ring[(j + 1) % ring.len()]);
        }
    }

    pub fn build(self) -> TriangleMesh {
        self.mesh
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(edge: f64) -> TriangleMesh {
        let mut b = MeshBuilder::default();
        let h = edge / 2.0;
        b.cuboid(Point3::new(h, h, h), Vector3::new(h, h, h), &Rotation3::identity());
        b.build()
    }

    #[test]
    fn cube_area_and_count() {
        let mesh = cube(0.1);
        assert!((mesh.area() - 0.06).abs() < 1e-12);
        let cloud = sample_surface(&mesh, 1.0, 3).unwrap();
        // 600 cm² at one point per cm²; Poisson tolerance would be ±30.
        assert!((570..=630).contains(&cloud.len()), "{}", cloud.len());
        for p in cloud.iter() {
            let on_face = [p.x, p.y, p.z].iter().any(|&c| c.abs() < 1e-12 || (c - 0.1).abs() < 1e-12);
            assert!(on_face, "{p:?}");
        }
    }

    #[test]
    fn faces_get_proportional_share() {
        let mesh = cube(0.1);
        let cloud = sample_surface(&mesh, 5.0, 9).unwrap();
        let top = cloud.iter().filter(|p| (p.z - 0.1).abs() < 1e-12).count();
        assert!((top as i64 - 500).abs() <= 2, "{top}");
    }

    #[test]
    fn single_triangle_is_planar() {
        let mesh = TriangleMesh::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.1, 0.0, 0.05), Point3::new(0.0, 0.1, 0.02)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let cloud = sample_surface(&mesh, 10.0, 1).unwrap();
        let [a, b, c] = mesh.triangle(0);
        let n = (b - a).cross(&(c - a)).normalize();
        assert!(!cloud.is_empty());
        for p in cloud.iter() {
            assert!((p - a).dot(&n).abs() < 1e-9);
            // Barycentric containment.
            let v0 = b - a;
            let v1 = c - a;
            let v2 = p - a;
            let (d00, d01, d11) = (v0.dot(&v0), v0.dot(&v1), v1.dot(&v1));
            let (d20, d21) = (v2.dot(&v0), v2.dot(&v1));
            let den = d00 * d11 - d01 * d01;
            let v = (d11 * d20 - d01 * d21) / den;
            let w = (d00 * d21 - d01 * d20) / den;
            assert!(v >= -1e-9 && w >= -1e-9 && v + w <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn degenerate_meshes() {
        assert!(matches!(
            sample_surface(&TriangleMesh::default(), 1.0, 0),
            Err(SimulatorError::DegenerateMesh)
        ));
        let flat = TriangleMesh::new(vec![Point3::origin(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(sample_surface(&flat, 1.0, 0), Err(SimulatorError::DegenerateMesh)));
        assert!(sample_surface(&cube(0.1), 0.0, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let mesh = cube(0.05);
        assert_eq!(sample_surface(&mesh, 20.0, 4).unwrap(), sample_surface(&mesh, 20.0, 4).unwrap());
        assert_ne!(sample_surface(&mesh, 20.0, 4).unwrap(), sample_surface(&mesh, 20.0, 5).unwrap());
    }

    #[test]
    fn obj_round_trip_and_parsing() {
        let mesh = cube(0.037);
        assert_eq!(TriangleMesh::parse_obj(&mesh.to_obj()).unwrap(), mesh);

        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -3 -2\n";
        let m = TriangleMesh::parse_obj(text).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);

        for bad in ["v 0 0\n", "v 0 0 x\n", "v 0 0 0\nf 1 2 3\n", "v 0 0 0\nf 1 0 1\n", "f 1 2\n"] {
            assert!(matches!(TriangleMesh::parse_obj(bad), Err(SimulatorError::MeshParse { .. })), "{bad}");
        }
    }
}
