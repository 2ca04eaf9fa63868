use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trial::{random_resting_pose, setup_rng, track_frames, trial_config, TrialResult};
use super::HarnessError;
use crate::simulator::{generate_sequence, speedup_resample, Keyframe, MotionScript, PartModel, ScanFrame, Scene};
use crate::tracker::{Strategy, TrackerConfig};

/// Base motion replayed at increasing speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    /// Straight line along a random horizontal direction (linear actuator).
    Translation,
    /// Spin about the vertical axis through the part (turntable).
    Rotation,
}

impl MotionKind {
    pub const ALL: [MotionKind; 2] = [MotionKind::Translation, MotionKind::Rotation];

    pub fn name(&self) -> &'static str {
        match self {
            MotionKind::Translation => "translation",
            MotionKind::Rotation => "rotation",
        }
    }

    /// Unit of the reported speed.
    pub fn unit(&self) -> &'static str {
        match self {
            MotionKind::Translation => "cm/s",
            MotionKind::Rotation => "deg/s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedProtocol {
    pub fps: f64,
    pub duration_s: f64,
    /// Speed of the base sequences.
    pub translation_cm_s: f64,
    pub rotation_deg_s: f64,
    pub noise_sigma_mm: f64,
    /// Largest playback factor tried.
    pub max_factor: f64,
    /// Bisection stops once the bracket is this narrow.
    pub resolution: f64,
}

impl Default for SpeedProtocol {
    fn default() -> Self {
        Self {
            fps: 10.0,
            duration_s: 24.0,
            translation_cm_s: 0.5,
            rotation_deg_s: 3.0,
            noise_sigma_mm: 2.0,
            max_factor: 32.0,
            resolution: 0.25,
        }
    }
}

impl SpeedProtocol {
    pub fn base_speed(&self, motion: MotionKind) -> f64 {
        match motion {
            MotionKind::Translation => self.translation_cm_s,
            MotionKind::Rotation => self.rotation_deg_s,
        }
    }
}

/// Scene and base script for one speed condition.
pub fn speed_setup(
    part: &Arc<PartModel>,
    motion: MotionKind,
    visibility: f64,
    seed: u64,
    protocol: &SpeedProtocol,
) -> (Scene, MotionScript) {
    let rest = random_resting_pose(part, seed);
    let mut rng = setup_rng(seed, &format!("speed/{}/{}", part.name, motion.name()));
    let (start, end) = match motion {
        MotionKind::Translation => {
            let heading = rng.random_range(0.0..TAU);
            let dir = Vector3::new(heading.cos(), heading.sin(), 0.0);
            let half = 0.5 * protocol.translation_cm_s * protocol.duration_s / 100.0;
            (
                rest.with_translation(rest.translation() - dir * half),
                rest.with_translation(rest.translation() + dir * half),
            )
        }
        MotionKind::Rotation => {
            let sweep = (protocol.rotation_deg_s * protocol.duration_s).to_radians();
            let spin = Rotation3::from_axis_angle(&Vector3::z_axis(), sweep);
            let end = crate::geometry::RigidPose::new(spin.matrix() * rest.rotation(), *rest.translation())
                .expect("product of rotations");
            (rest, end)
        }
    };
    let scene = Scene::new(part.clone(), start, seed)
        .with_visibility(visibility)
        .with_noise(protocol.noise_sigma_mm / 1e3);
    let script = MotionScript::new(vec![
        Keyframe { time: 0.0, pose: start },
        Keyframe {
            time: protocol.duration_s,
            pose: end,
        },
    ])
    .expect("increasing keyframes");
    (scene, script)
}

pub fn speed_frames(scene: &Scene, script: &MotionScript, protocol: &SpeedProtocol) -> Result<Vec<ScanFrame>, HarnessError> {
    Ok(generate_sequence(scene, Some(script), protocol.fps, protocol.duration_s)?)
}

/// Whether tracking at playback `factor` ends within the success thresholds.
pub fn tracks_at_factor(
    frames: &[ScanFrame],
    part: &PartModel,
    strategy: Strategy,
    cfg: &TrackerConfig,
    factor: f64,
) -> Result<bool, HarnessError> {
    let seq = speedup_resample(frames, factor)?;
    let cfg = trial_config(cfg, part, strategy);
    let run = track_frames(&seq, part.cad.clone(), seq[0].truth_pose, &cfg);
    let result = TrialResult::evaluate("speed", part, 0.0, 0, strategy, &seq, &run);
    Ok(result.success)
}

/// Largest playback factor on the `resolution` grid that still tracks,
/// found by bisection between 1 and `max_factor`. Zero when even the base
/// sequence fails.
pub fn find_max_factor(
    frames: &[ScanFrame],
    part: &PartModel,
    strategy: Strategy,
    cfg: &TrackerConfig,
    max_factor: f64,
    resolution: f64,
) -> Result<f64, HarnessError> {
    if !(max_factor >= 1.0) || !(resolution > 0.0) {
        return Err(HarnessError::Precondition(format!(
            "need max_factor >= 1 and resolution > 0 (got {max_factor}, {resolution})"
        )));
    }
    if !tracks_at_factor(frames, part, strategy, cfg, 1.0)? {
        return Ok(0.0);
    }
    if tracks_at_factor(frames, part, strategy, cfg, max_factor)? {
        return Ok(max_factor);
    }
    let (mut lo, mut hi) = (1.0, max_factor);
    while hi - lo > resolution {
        let mid = 1.0 + (((lo + hi) / 2.0 - 1.0) / resolution).round() * resolution;
        if mid <= lo || mid >= hi {
            break;
        }
        if tracks_at_factor(frames, part, strategy, cfg, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Maximum trackable speed for one (part, visibility, motion, strategy, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEntry {
    pub part_id: String,
    pub visibility: f64,
    pub motion: MotionKind,
    pub strategy: Strategy,
    pub seed: u64,
    pub max_factor: f64,
    /// `max_factor` times the base speed, in the motion's unit.
    pub max_speed: f64,
}

/// Runs every strategy on one shared base sequence.
pub fn run_speed_condition(
    part: &Arc<PartModel>,
    motion: MotionKind,
    visibility: f64,
    seed: u64,
    strategies: &[Strategy],
    cfg: &TrackerConfig,
    protocol: &SpeedProtocol,
) -> Result<Vec<SpeedEntry>, HarnessError> {
    let (scene, script) = speed_setup(part, motion, visibility, seed, protocol);
    let frames = speed_frames(&scene, &script, protocol)?;
    strategies
        .iter()
        .map(|&strategy| {
            let max_factor = find_max_factor(&frames, part, strategy, cfg, protocol.max_factor, protocol.resolution)?;
            Ok(SpeedEntry {
                part_id: part.name.clone(),
                visibility,
                motion,
                strategy,
                seed,
                max_factor,
                max_speed: max_factor * protocol.base_speed(motion),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::PartKind;

    #[test]
    fn base_scripts_cover_the_configured_motion() {
        let part = Arc::new(PartModel::procedural(PartKind::Cup));
        let p = SpeedProtocol::default();
        let (_, lin) = speed_setup(&part, MotionKind::Translation, 0.5, 3, &p);
        let (a, b) = (lin.pose_at(0.0), lin.pose_at(p.duration_s));
        assert!((a.translation_distance(&b) - 0.12).abs() < 1e-12);
        assert!(crate::geometry::rotation_angle_between(&a, &b) < 1e-9);

        let (_, spin) = speed_setup(&part, MotionKind::Rotation, 0.5, 3, &p);
        let (a, b) = (spin.pose_at(0.0), spin.pose_at(p.duration_s));
        assert!((crate::geometry::rotation_angle_between(&a, &b) - 72.0).abs() < 1e-6);
        assert!(a.translation_distance(&b) < 1e-12);
    }
}
