use std::ops::Deref;

use nalgebra::{Point3, Vector3};

use super::GeometryError;

/// An unordered set of 3D points in meters. All coordinates are finite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vector3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn contains_xy(&self, p: &Point3<f64>) -> bool {
        (0..2).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self, GeometryError> {
        if let Some(index) = points
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(GeometryError::NonFinitePoint { index });
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub(crate) fn from_vec_unchecked(points: Vec<Point3<f64>>) -> Self {
        debug_assert!(points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())));
        Self { points }
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }

    /// Copies the points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        Self::from_vec_unchecked(indices.iter().map(|&i| self.points[i]).collect())
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.points.iter().map(|p| p.coords).sum();
        Some(Point3::from(sum / self.points.len() as f64))
    }

    pub fn aabb(&self) -> Option<Aabb> {
        let first = *self.points.first()?;
        let (min, max) = self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        });
        Some(Aabb { min, max })
    }

    /// Appends another cloud's points.
    pub fn extend_from(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}

impl Deref for PointCloud {
    type Target = [Point3<f64>];

    fn deref(&self) -> &Self::Target {
        &self.points
    }
}

impl TryFrom<Vec<Point3<f64>>> for PointCloud {
    type Error = GeometryError;

    fn try_from(points: Vec<Point3<f64>>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}
