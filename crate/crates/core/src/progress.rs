//! Depowdering progress from the powder surface height around a part.
//!
//! A scan is split into part and powder by proximity to the model placed at
//! the current pose. Powder points within a horizontal distance band of the
//! part form the powder contour; its average height `H_pow` gives
//!
//! ```text
//! eta = (H_max - H_pow) / (H_max - H_min)
//! ```
//!
//! where `H_max` / `H_min` are the top / bottom heights of the posed model.
//! Heights are world `z`.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, KdTree, NearestNeighborIndex, PointCloud, RigidPose};

/// Extents flatter than this make the height ratio meaningless, meters.
pub const MIN_EXTENT: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgressError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("no powder point in the contour band up to {d_max:.4} m")]
    NoContour { d_max: f64 },
    #[error("model height extent {extent:.6} m is below the 1 mm minimum")]
    DegenerateExtent { extent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightStatistic {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProgressConfig {
    /// Inner radius of the contour band, cm.
    pub contour_min_cm: f64,
    /// Outer radius of the contour band, cm.
    pub contour_max_cm: f64,
    pub height_statistic: HeightStatistic,
    /// Outer-radius growth per retry when the band is empty.
    pub widen_factor: f64,
    pub max_widenings: usize,
    /// Band points farther than this from the band's median height are not
    /// powder (a nozzle or other clutter above the bed), cm. `None` keeps all.
    pub max_height_deviation_cm: Option<f64>,
}

impl Default for ProgressConfig {
    fn default() -> Self {
        Self {
            contour_min_cm: 1.0,
            contour_max_cm: 3.0,
            height_statistic: HeightStatistic::Mean,
            widen_factor: 1.5,
            max_widenings: 4,
            max_height_deviation_cm: Some(1.0),
        }
    }
}

/// Partition of a scan into part and powder points.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub part_indices: Vec<usize>,
    pub powder_indices: Vec<usize>,
    pub part_points: PointCloud,
    pub powder_points: PointCloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowderContour {
    pub contour_points: PointCloud,
    /// Arithmetic mean of contour heights (`H_pow`), meters.
    pub mean_height: f64,
    /// Outer band radius that produced the contour, after any widening.
    pub d_max_used: f64,
}

impl PowderContour {
    fn from_points(points: Vec<Point3<f64>>, d_max_used: f64) -> Self {
        let mean_height = points.iter().map(|p| p.z).sum::<f64>() / points.len() as f64;
        Self {
            contour_points: PointCloud::from_vec_unchecked(points),
            mean_height,
            d_max_used,
        }
    }

    pub fn median_height(&self) -> f64 {
        let mut z: Vec<f64> = self.contour_points.iter().map(|p| p.z).collect();
        z.sort_by(f64::total_cmp);
        let n = z.len();
        if n % 2 == 1 {
            z[n / 2]
        } else {
            0.5 * (z[n / 2 - 1] + z[n / 2])
        }
    }

    pub fn height(&self, statistic: HeightStatistic) -> f64 {
        match statistic {
            HeightStatistic::Mean => self.mean_height,
            HeightStatistic::Median => self.median_height(),
        }
    }
}

/// Top and bottom heights of the posed model, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightExtent {
    pub h_max: f64,
    pub h_min: f64,
}

impl HeightExtent {
    pub fn new(h_max: f64, h_min: f64) -> Result<Self, ProgressError> {
        let extent = h_max - h_min;
        if !(extent >= MIN_EXTENT) {
            return Err(ProgressError::DegenerateExtent { extent });
        }
        Ok(Self { h_max, h_min })
    }

    pub fn span(&self) -> f64 {
        self.h_max - self.h_min
    }

    /// Powder surface height that corresponds to progress `eta`.
    pub fn height_at(&self, eta: f64) -> f64 {
        self.h_max - eta * self.span()
    }
}

/// Labels a scan point as part iff its nearest model point is strictly within `xi` (meters).
pub fn segment_scan(scan: &PointCloud, transformed_cad: &PointCloud, xi: f64) -> Result<Segmentation, ProgressError> {
    if scan.is_empty() {
        return Err(ProgressError::Empty("scan"));
    }
    let bounds = transformed_cad
        .aabb()
        .ok_or(ProgressError::Empty("transformed model"))?;
    Ok(segment_scan_indexed(
        scan,
        &NearestNeighborIndex::new(transformed_cad),
        &bounds,
        xi,
    ))
}

/// [`segment_scan`] with a prebuilt index and bounds of the posed model.
pub fn segment_scan_indexed(
    scan: &PointCloud,
    cad_index: &NearestNeighborIndex,
    cad_bounds: &Aabb,
    xi: f64,
) -> Segmentation {
    let reach = cad_bounds.expanded(xi);
    let xi_sq = xi * xi;
    let (mut part_indices, mut powder_indices) = (Vec::new(), Vec::new());
    for (i, p) in scan.iter().enumerate() {
        let is_part = reach.contains(p)
            && cad_index
                .nearest_within(p, xi)
                .is_some_and(|nb| nb.dist_sq < xi_sq);
        if is_part {
            part_indices.push(i);
        } else {
            powder_indices.push(i);
        }
    }
    Segmentation {
        part_points: scan.select(&part_indices),
        powder_points: scan.select(&powder_indices),
        part_indices,
        powder_indices,
    }
}

/// Powder points whose horizontal distance to the nearest part point lies in
/// `[d_min, d_max]` (meters), widening `d_max` by 1.5x up to four times when
/// the band is empty. Height outliers are dropped as in [`ProgressConfig`].
pub fn extract_contour(seg: &Segmentation, d_min: f64, d_max: f64) -> Result<PowderContour, ProgressError> {
    if seg.part_points.is_empty() {
        return Err(ProgressError::Empty("part segment"));
    }
    let cfg = ProgressConfig {
        contour_min_cm: d_min * 100.0,
        contour_max_cm: d_max * 100.0,
        ..ProgressConfig::default()
    };
    contour_around(&seg.part_points, &seg.powder_points, &cfg)
}

/// Contour band of `powder` around the horizontal footprint of `reference`.
pub fn contour_around(
    reference: &[Point3<f64>],
    powder: &[Point3<f64>],
    cfg: &ProgressConfig,
) -> Result<PowderContour, ProgressError> {
    if powder.is_empty() {
        return Err(ProgressError::Empty("powder segment"));
    }
    if reference.is_empty() {
        return Err(ProgressError::Empty("part segment"));
    }
    let (d_min, d_max) = (cfg.contour_min_cm / 100.0, cfg.contour_max_cm / 100.0);
    let footprint = KdTree::<2>::new(reference.iter().map(|p| [p.x, p.y]));
    let bounds = PointCloud::from_vec_unchecked(reference.to_vec())
        .aabb()
        .expect("non-empty");

    let mut outer = d_max;
    for _ in 0..=cfg.max_widenings {
        let reach = bounds.expanded(outer);
        let band: Vec<Point3<f64>> = powder
            .iter()
            .filter(|p| reach.contains_xy(p))
            .filter(|p| {
                footprint
                    .nearest_within(&[p.x, p.y], outer * outer)
                    .is_some_and(|(_, d_sq)| d_sq.sqrt() >= d_min && d_sq.sqrt() <= outer)
            })
            .copied()
            .collect();
        if !band.is_empty() {
            let band = match cfg.max_height_deviation_cm {
                Some(dev) => drop_height_outliers(band, dev / 100.0),
                None => band,
            };
            return Ok(PowderContour::from_points(band, outer));
        }
        outer *= cfg.widen_factor;
    }
    Err(ProgressError::NoContour {
        d_max: outer / cfg.widen_factor,
    })
}

/// Keeps points within `max_dev` of the median height; never empties a non-empty set.
fn drop_height_outliers(points: Vec<Point3<f64>>, max_dev: f64) -> Vec<Point3<f64>> {
    let mut z: Vec<f64> = points.iter().map(|p| p.z).collect();
    z.sort_by(f64::total_cmp);
    let median = z[z.len() / 2];
    points.into_iter().filter(|p| (p.z - median).abs() <= max_dev).collect()
}

/// Progress from the contour's mean height.
pub fn estimate_progress(contour: &PowderContour, extent: &HeightExtent) -> f64 {
    progress_from_height(contour.mean_height, extent)
}

/// Height ratio with `h_pow` clamped into `[h_min, h_max]`; always in `[0, 1]`.
pub fn progress_from_height(h_pow: f64, extent: &HeightExtent) -> f64 {
    if h_pow.is_nan() {
        return 0.0;
    }
    let h = h_pow.clamp(extent.h_min, extent.h_max);
    ((extent.h_max - h) / extent.span()).clamp(0.0, 1.0)
}

pub fn cad_height_extent(cad: &PointCloud, pose: &RigidPose) -> Result<HeightExtent, ProgressError> {
    if cad.is_empty() {
        return Err(ProgressError::Empty("model"));
    }
    let (lo, hi) = cad.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let z = pose.transform_point(p).z;
        (lo.min(z), hi.max(z))
    });
    HeightExtent::new(hi, lo)
}

/// Everything the progress pipeline measured on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameProgress {
    pub eta: f64,
    pub powder_height: f64,
    pub extent: HeightExtent,
    pub part_count: usize,
    pub powder_count: usize,
    pub contour_count: usize,
}

/// Runs segmentation, contour extraction and the height ratio on one scan.
///
/// `transformed_cad` is the model at the current pose. When no scan point is
/// close enough to count as part (a fully buried part), the band is taken
/// around the model's own footprint instead.
pub fn estimate_frame_progress(
    scan: &PointCloud,
    transformed_cad: &PointCloud,
    xi: f64,
    cfg: &ProgressConfig,
) -> Result<FrameProgress, ProgressError> {
    if scan.is_empty() {
        return Err(ProgressError::Empty("scan"));
    }
    let bounds = transformed_cad
        .aabb()
        .ok_or(ProgressError::Empty("transformed model"))?;
    let extent = HeightExtent::new(bounds.max.z, bounds.min.z)?;
    let seg = segment_scan_indexed(scan, &NearestNeighborIndex::new(transformed_cad), &bounds, xi);
    let reference: &[Point3<f64>] = if seg.part_points.is_empty() {
        transformed_cad
    } else {
        &seg.part_points
    };
    let contour = contour_around(reference, &seg.powder_points, cfg)?;
    let powder_height = contour.height(cfg.height_statistic);
    Ok(FrameProgress {
        eta: progress_from_height(powder_height, &extent),
        powder_height,
        extent,
        part_count: seg.part_points.len(),
        powder_count: seg.powder_points.len(),
        contour_count: contour.contour_points.len(),
    })
}
