use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::motion::MotionScript;
use super::scene::Scene;
use super::SimulatorError;
use crate::geometry::{KdTree, PointCloud, RigidPose};
use crate::progress::progress_from_height;

/// Generative label of a scan point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Label {
    Part = 0,
    Powder = 1,
    Occluder = 2,
}

impl Label {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::Part),
            1 => Some(Label::Powder),
            2 => Some(Label::Occluder),
            _ => None,
        }
    }
}

/// One simulated scan with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanFrame {
    pub timestamp: f64,
    pub points: PointCloud,
    pub truth_pose: RigidPose,
    /// One label per point.
    pub labels: Vec<Label>,
    pub truth_eta: f64,
}

impl ScanFrame {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

const POWDER_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Seed for an independent random stream derived from the scene seed.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined input.
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Renders the scene at `time`. A pure function of `(scene, time, script)`:
/// the powder surface is fixed per seed and the sensor noise stream is keyed
/// by the timestamp.
pub fn render_frame(scene: &Scene, time: f64, script: Option<&MotionScript>) -> ScanFrame {
    let pose = script.map_or(scene.part_pose, |s| s.pose_at(time));
    let opts = &scene.render;
    let h = scene.powder_height;

    // Exposed part surface.
    let mut points: Vec<Point3<f64>> = scene
        .part
        .scene_cloud
        .iter()
        .map(|p| pose.transform_point(p))
        .filter(|p| p.z >= h)
        .collect();
    let mut labels = vec![Label::Part; points.len()];

    // Powder surface around the exposed part.
    let footprint = KdTree::<2>::new(points.iter().map(|p| [p.x, p.y]));
    let clearance_sq = opts.footprint_clearance * opts.footprint_clearance;
    let ext = &scene.powder_extent;
    let spacing = opts.powder_spacing;
    let nx = (ext.width() / spacing).floor() as usize;
    let ny = (ext.depth() / spacing).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(scene.seed, POWDER_STREAM));
    for j in 0..ny {
        for i in 0..nx {
            let (u, v, w): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            let x = ext.min_x + (i as f64 + u) * spacing;
            let y = ext.min_y + (j as f64 + v) * spacing;
            if footprint.nearest_within(&[x, y], clearance_sq).is_some() {
                continue;
            }
            points.push(Point3::new(x, y, h + opts.roughness * (2.0 * w - 1.0)));
            labels.push(Label::Powder);
        }
    }

    if let Some(occ) = &scene.occluder {
        let [cx, cy] = occ.center_at(time);
        let bottom = h + occ.clearance;
        let top = bottom + occ.height;
        let r_sq = occ.radius * occ.radius;
        let inside = |p: &Point3<f64>| {
            let (dx, dy) = (p.x - cx, p.y - cy);
            dx * dx + dy * dy < r_sq && p.z >= bottom && p.z <= top
        };
        let keep: Vec<bool> = points.iter().map(|p| !inside(p)).collect();
        let mut k = keep.iter();
        points.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        labels.retain(|_| *k.next().unwrap());
        for p in cylinder_surface(cx, cy, occ.radius, bottom, top, spacing) {
            points.push(p);
            labels.push(Label::Occluder);
        }
    }

    // Shadowing depends on the true surface; the sensor then measures what it
    // sees. Culling after noise would favor points pushed upward.
    if opts.cull {
        let keep = top_down_cull(&points, opts.cull_cell);
        points = keep.iter().map(|&i| points[i]).collect();
        labels = keep.iter().map(|&i| labels[i]).collect();
    }

    if scene.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(scene.seed, NOISE_STREAM));
        rng.set_stream(time.to_bits());
        for p in &mut points {
            let n = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            *p += n * scene.noise_sigma;
        }
    }

    let extent = scene.height_extent(&pose);
    ScanFrame {
        timestamp: time,
        points: PointCloud::from_vec_unchecked(points),
        truth_pose: pose,
        labels,
        truth_eta: progress_from_height(h, &extent),
    }
}

/// Side wall and top cap of a vertical cylinder, sampled on a regular pattern.
fn cylinder_surface(cx: f64, cy: f64, radius: f64, bottom: f64, top: f64, spacing: f64) -> Vec<Point3<f64>> {
    let mut out = Vec::new();
    let n_around = ((TAU * radius / spacing).ceil() as usize).max(8);
    let n_up = ((top - bottom) / spacing).ceil() as usize;
    for k in 0..=n_up {
        let z = bottom + (top - bottom) * k as f64 / n_up.max(1) as f64;
        for j in 0..n_around {
            let a = TAU * j as f64 / n_around as f64;
            out.push(Point3::new(cx + radius * a.cos(), cy + radius * a.sin(), z));
        }
    }
    let n = (radius / spacing).ceil() as i64;
    for j in -n..=n {
        for i in -n..=n {
            let (dx, dy) = (i as f64 * spacing, j as f64 * spacing);
            if dx * dx + dy * dy < radius * radius {
                out.push(Point3::new(cx + dx, cy + dy, top));
            }
        }
    }
    out
}

/// Indices (ascending) of the highest point in each occupied xy cell; ties
/// go to the lower index.
pub fn top_down_cull(points: &[Point3<f64>], cell: f64) -> Vec<usize> {
    let mut best: HashMap<(i64, i64), usize> = HashMap::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let key = ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
        best.entry(key)
            .and_modify(|b| {
                if p.z > points[*b].z {
                    *b = i;
                }
            })
            .or_insert(i);
    }
    let mut keep: Vec<usize> = best.into_values().collect();
    keep.sort_unstable();
    keep
}

/// Frames at timestamps `k / fps` for `k` in `0..round(duration * fps)`.
pub fn generate_sequence(
    scene: &Scene,
    script: Option<&MotionScript>,
    fps: f64,
    duration: f64,
) -> Result<Vec<ScanFrame>, SimulatorError> {
    if !(fps > 0.0 && fps.is_finite()) || !(duration > 0.0 && duration.is_finite()) {
        return Err(SimulatorError::InvalidArgument(format!(
            "fps and duration must be > 0 (got {fps}, {duration})"
        )));
    }
    scene.validate()?;
    let n = ((duration * fps).round() as usize).max(1);
    Ok((0..n)
        .into_par_iter()
        .map(|k| render_frame(scene, k as f64 / fps, script))
        .collect())
}

/// Plays a sequence back `factor` times faster at the original frame rate:
/// keeps frames `round(k * factor)` and gives the k-th kept frame the k-th
/// original timestamp.
pub fn speedup_resample(frames: &[ScanFrame], factor: f64) -> Result<Vec<ScanFrame>, SimulatorError> {
    if frames.is_empty() {
        return Err(SimulatorError::InvalidArgument("no frames to resample".into()));
    }
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(SimulatorError::InvalidArgument(format!("speedup factor must be >= 1, got {factor}")));
    }
    let mut out = Vec::new();
    for k in 0.. {
        let idx = (k as f64 * factor).round() as usize;
        if idx >= frames.len() {
            break;
        }
        let mut f = frames[idx].clone();
        // idx >= k, so the k-th original timestamp exists.
        f.timestamp = frames[k].timestamp;
        out.push(f);
    }
    Ok(out)
}
