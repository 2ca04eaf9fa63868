use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{
    is_success, max_relative_drift, mean, rotation_error_deg, symmetric_rotation_error_deg, translation_error_cm,
    LOST_ROTATION_DEG, LOST_TRANSLATION_CM,
};
use super::HarnessError;
use crate::geometry::{PointCloud, RigidPose};
use crate::simulator::{
    generate_sequence, place_on_floor, Keyframe, MotionScript, PartModel, ScanFrame, Scene,
};
use crate::tracker::{init_tracker, Strategy, TrackerConfig, TrajectoryRecord};

/// Height of the box floor the parts rest on, meters.
pub const FLOOR_Z: f64 = 0.02;

/// Output of running a tracker over a frame sequence.
#[derive(Debug, Clone)]
pub struct TrackRun {
    /// One record per successfully processed frame.
    pub records: Vec<TrajectoryRecord>,
    /// Index of the frame at which tracking was lost (0 when initialization failed).
    pub lost_at: Option<usize>,
    /// Wall time spent inside the tracker.
    pub elapsed: Duration,
}

impl TrackRun {
    pub fn poses(&self) -> Vec<RigidPose> {
        self.records
            .iter()
            .map(|r| r.pose().expect("tracker poses are valid rotations"))
            .collect()
    }

    pub fn fps(&self) -> f64 {
        let s = self.elapsed.as_secs_f64();
        if s > 0.0 {
            self.records.len() as f64 / s
        } else {
            f64::INFINITY
        }
    }
}

/// Initializes on the first frame at `t_init`, then steps through every
/// frame (the first one included). Stops at the first lost frame.
pub fn track_frames(frames: &[ScanFrame], cad: Arc<PointCloud>, t_init: RigidPose, cfg: &TrackerConfig) -> TrackRun {
    let mut run = TrackRun {
        records: Vec::with_capacity(frames.len()),
        lost_at: None,
        elapsed: Duration::ZERO,
    };
    let Some(first) = frames.first() else {
        return run;
    };
    let start = Instant::now();
    let mut state = match init_tracker(cad, t_init, &first.points, cfg) {
        Ok(s) => s,
        Err(_) => {
            run.lost_at = Some(0);
            return run;
        }
    };
    for (i, frame) in frames.iter().enumerate() {
        match state.step(&frame.points) {
            Ok(report) => run.records.push(TrajectoryRecord::from_step(i, frame.timestamp, &report)),
            Err(_) => {
                run.lost_at = Some(i);
                break;
            }
        }
    }
    run.elapsed = start.elapsed();
    run
}

/// Outcome of one tracking trial. Errors are per frame; rotation errors are
/// symmetry-aware (minimum over the part's symmetries) unless marked raw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub experiment: String,
    pub strategy: Strategy,
    pub part_id: String,
    pub visibility: f64,
    pub seed: u64,
    pub r_err_deg: Vec<f64>,
    pub r_err_raw_deg: Vec<f64>,
    pub t_err_cm: Vec<f64>,
    pub final_r_err_deg: f64,
    pub final_t_err_cm: f64,
    pub success: bool,
    pub lost_at: Option<usize>,
    pub template_counts: Vec<usize>,
    /// Wall-clock rate; not serialized so result files stay reproducible.
    #[serde(skip)]
    pub mean_fps: f64,
}

impl TrialResult {
    /// Scores a run against the frames' ground truth.
    pub fn evaluate(
        experiment: &str,
        part: &PartModel,
        visibility: f64,
        seed: u64,
        strategy: Strategy,
        frames: &[ScanFrame],
        run: &TrackRun,
    ) -> Self {
        let n = frames.len();
        let mut r_err = vec![LOST_ROTATION_DEG; n];
        let mut r_raw = vec![LOST_ROTATION_DEG; n];
        let mut t_err = vec![LOST_TRANSLATION_CM; n];
        for rec in &run.records {
            let est = rec.pose().expect("tracker poses are valid rotations");
            let truth = &frames[rec.frame].truth_pose;
            r_err[rec.frame] = symmetric_rotation_error_deg(&est, truth, &part.symmetries);
            r_raw[rec.frame] = rotation_error_deg(&est, truth);
            t_err[rec.frame] = translation_error_cm(&est, truth);
        }
        let (final_r, final_t) = match (r_err.last(), t_err.last()) {
            (Some(&r), Some(&t)) => (r, t),
            _ => (LOST_ROTATION_DEG, LOST_TRANSLATION_CM),
        };
        Self {
            experiment: experiment.to_string(),
            strategy,
            part_id: part.name.clone(),
            visibility,
            seed,
            r_err_deg: r_err,
            r_err_raw_deg: r_raw,
            t_err_cm: t_err,
            final_r_err_deg: final_r,
            final_t_err_cm: final_t,
            success: is_success(final_r, final_t),
            lost_at: run.lost_at,
            template_counts: run.records.iter().map(|r| r.template_points).collect(),
            mean_fps: run.fps(),
        }
    }

    pub fn mean_r_err(&self) -> f64 {
        mean(&self.r_err_deg)
    }

    pub fn mean_r_err_raw(&self) -> f64 {
        mean(&self.r_err_raw_deg)
    }

    pub fn mean_t_err(&self) -> f64 {
        mean(&self.t_err_cm)
    }

    /// Success recomputed from the stored final errors.
    pub fn recomputed_success(&self) -> bool {
        is_success(self.final_r_err_deg, self.final_t_err_cm)
    }

    /// Largest relative change of the template size from its first value.
    pub fn template_drift(&self) -> f64 {
        max_relative_drift(&self.template_counts)
    }
}

/// Tracker settings used by the experiments for a given part and strategy.
pub fn trial_config(base: &TrackerConfig, part: &PartModel, strategy: Strategy) -> TrackerConfig {
    TrackerConfig {
        strategy,
        xi_cm: part.xi_cm,
        ..*base
    }
}

/// Random generator for trial setup, independent per (seed, tag).
pub fn setup_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    rng.set_stream(h);
    rng
}

/// Resting pose with a seeded random yaw and a small random tilt.
pub fn random_resting_pose(part: &PartModel, seed: u64) -> RigidPose {
    let mut rng = setup_rng(seed, &format!("pose/{}", part.name));
    let roll = rng.random_range(-15.0..15.0);
    let pitch = rng.random_range(-15.0..15.0);
    let yaw = rng.random_range(0.0..360.0);
    place_on_floor(part, [roll, pitch, yaw], 0.0, 0.0, FLOOR_Z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticProtocol {
    pub fps: f64,
    pub duration_s: f64,
    pub noise_sigma_mm: f64,
    /// Orbit an occluder around the part.
    pub occluder: bool,
}

impl Default for StaticProtocol {
    fn default() -> Self {
        Self {
            fps: 10.0,
            duration_s: 4.0,
            noise_sigma_mm: 2.0,
            occluder: true,
        }
    }
}

/// The scene a static trial renders: part at rest, powder at `visibility`.
pub fn static_scene(part: &Arc<PartModel>, visibility: f64, seed: u64, protocol: &StaticProtocol) -> Scene {
    let pose = random_resting_pose(part, seed);
    let mut scene = Scene::new(part.clone(), pose, seed)
        .with_visibility(visibility)
        .with_noise(protocol.noise_sigma_mm / 1e3);
    if protocol.occluder {
        let mut occ = scene.default_occluder();
        occ.phase = setup_rng(seed, "occluder").random_range(0.0..TAU);
        scene.occluder = Some(occ);
    }
    scene
}

pub fn static_frames(scene: &Scene, protocol: &StaticProtocol) -> Result<Vec<ScanFrame>, HarnessError> {
    Ok(generate_sequence(scene, None, protocol.fps, protocol.duration_s)?)
}

/// Tracks a stationary part from its true initial pose and scores the run.
pub fn run_static_trial(
    scene: &Scene,
    visibility: f64,
    strategy: Strategy,
    cfg: &TrackerConfig,
    protocol: &StaticProtocol,
) -> Result<TrialResult, HarnessError> {
    let frames = static_frames(scene, protocol)?;
    Ok(score_frames("static", scene, visibility, strategy, cfg, &frames))
}

/// Runs one strategy over prepared frames of `scene`.
pub fn score_frames(
    experiment: &str,
    scene: &Scene,
    visibility: f64,
    strategy: Strategy,
    cfg: &TrackerConfig,
    frames: &[ScanFrame],
) -> TrialResult {
    let cfg = trial_config(cfg, &scene.part, strategy);
    let t_init = frames.first().map_or(scene.part_pose, |f| f.truth_pose);
    let run = track_frames(frames, scene.part.cad.clone(), t_init, &cfg);
    TrialResult::evaluate(experiment, &scene.part, visibility, scene.seed, strategy, frames, &run)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushProtocol {
    pub fps: f64,
    pub speed_cm_s: f64,
    pub distance_cm: f64,
    /// Largest yaw the push induces, for a contact at the part's edge.
    pub max_yaw_deg: f64,
    /// Rest before and after the push, seconds.
    pub rest_s: f64,
    pub min_visibility: f64,
    pub max_visibility: f64,
    pub noise_sigma_mm: f64,
}

impl Default for PushProtocol {
    fn default() -> Self {
        Self {
            fps: 10.0,
            speed_cm_s: 1.0,
            distance_cm: 8.0,
            max_yaw_deg: 45.0,
            rest_s: 1.0,
            min_visibility: 0.4,
            max_visibility: 0.6,
            noise_sigma_mm: 2.0,
        }
    }
}

/// A sampled push: direction, contact offset and the resulting motion.
#[derive(Debug, Clone)]
pub struct PushSetup {
    pub scene: Scene,
    pub script: MotionScript,
    pub visibility: f64,
    pub duration_s: f64,
}

/// Push along a random horizontal direction; the random contact offset
/// (-1 to 1 across the part) sets how much the part yaws on the way.
pub fn push_setup(part: &Arc<PartModel>, seed: u64, protocol: &PushProtocol) -> PushSetup {
    let mut rng = setup_rng(seed, &format!("push/{}", part.name));
    let direction = rng.random_range(0.0..TAU);
    let contact: f64 = rng.random_range(-1.0..=1.0);
    let visibility = rng.random_range(protocol.min_visibility..=protocol.max_visibility);
    let start = random_resting_pose(part, seed);
    let scene = Scene::new(part.clone(), start, seed)
        .with_visibility(visibility)
        .with_noise(protocol.noise_sigma_mm / 1e3);

    let distance = protocol.distance_cm / 100.0;
    let push_time = if protocol.speed_cm_s > 0.0 && distance > 0.0 {
        protocol.distance_cm / protocol.speed_cm_s
    } else {
        0.0
    };
    let script = if push_time > 0.0 {
        let offset = Vector3::new(direction.cos(), direction.sin(), 0.0) * distance;
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), (contact * protocol.max_yaw_deg).to_radians());
        let end = RigidPose::new(yaw.matrix() * start.rotation(), start.translation() + offset)
            .expect("product of rotations");
        MotionScript::new(vec![
            Keyframe {
                time: protocol.rest_s,
                pose: start,
            },
            Keyframe {
                time: protocol.rest_s + push_time,
                pose: end,
            },
        ])
        .expect("increasing keyframes")
    } else {
        MotionScript::stationary(start)
    };
    PushSetup {
        scene,
        script,
        visibility,
        duration_s: 2.0 * protocol.rest_s + push_time,
    }
}

pub fn push_frames(setup: &PushSetup, protocol: &PushProtocol) -> Result<Vec<ScanFrame>, HarnessError> {
    Ok(generate_sequence(&setup.scene, Some(&setup.script), protocol.fps, setup.duration_s)?)
}

/// Tracks a part being pushed through the powder; success is judged on the final frame.
pub fn run_push_trial(
    part: &Arc<PartModel>,
    strategy: Strategy,
    cfg: &TrackerConfig,
    seed: u64,
    protocol: &PushProtocol,
) -> Result<TrialResult, HarnessError> {
    let setup = push_setup(part, seed, protocol);
    let frames = push_frames(&setup, protocol)?;
    Ok(score_frames("push", &setup.scene, setup.visibility, strategy, cfg, &frames))
}
