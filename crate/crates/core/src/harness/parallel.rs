use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;

use super::trial::{
    random_resting_pose, setup_rng, static_frames, static_scene, track_frames, trial_config, StaticProtocol, TrackRun,
    TrialResult,
};
use super::HarnessError;
use crate::geometry::RigidPose;
use crate::simulator::{generate_sequence, resting_height, Keyframe, MotionScript, PartModel, ScanFrame, Scene};
use crate::tracker::{Strategy, TrackerConfig};

/// A prepared trial: rendered frames plus what is needed to score them.
#[derive(Debug, Clone)]
pub struct TrialJob {
    pub experiment: String,
    pub scene: Scene,
    pub visibility: f64,
    pub strategy: Strategy,
    pub frames: Vec<ScanFrame>,
}

impl TrialJob {
    pub fn static_trial(
        part: &Arc<PartModel>,
        visibility: f64,
        seed: u64,
        strategy: Strategy,
        protocol: &StaticProtocol,
    ) -> Result<Self, HarnessError> {
        let scene = static_scene(part, visibility, seed, protocol);
        let frames = static_frames(&scene, protocol)?;
        Ok(Self {
            experiment: "static".into(),
            scene,
            visibility,
            strategy,
            frames,
        })
    }

    /// The part rests, tips over by `tilt_deg` while sliding 1.5 cm, then
    /// rests again. 10 Hz, 1 s before and 2.5 s after a 1.5 s topple.
    pub fn topple(
        part: &Arc<PartModel>,
        visibility: f64,
        seed: u64,
        strategy: Strategy,
        tilt_deg: f64,
        noise_sigma_mm: f64,
    ) -> Result<Self, HarnessError> {
        let start = random_resting_pose(part, seed);
        let mut rng = setup_rng(seed, &format!("topple/{}", part.name));
        let heading = rng.random_range(0.0..TAU);
        let dir = Vector3::new(heading.cos(), heading.sin(), 0.0);
        // Tipping toward `dir` turns about the horizontal axis z x dir.
        let axis = Unit::new_normalize(Vector3::z().cross(&dir));
        let tip = Rotation3::from_axis_angle(&axis, tilt_deg.to_radians());
        let tipped = RigidPose::new(tip.matrix() * start.rotation(), start.translation() + dir * 0.015)
            .expect("product of rotations");
        // Settle back onto the floor.
        let dz = resting_height(part, &start) - resting_height(part, &tipped);
        let end = tipped.with_translation(tipped.translation() + Vector3::new(0.0, 0.0, dz));
        let script = MotionScript::new(vec![
            Keyframe { time: 1.0, pose: start },
            Keyframe { time: 2.5, pose: end },
        ])
        .expect("increasing keyframes");
        let scene = Scene::new(part.clone(), start, seed)
            .with_visibility(visibility)
            .with_noise(noise_sigma_mm / 1e3);
        let frames = generate_sequence(&scene, Some(&script), 10.0, 5.0)?;
        Ok(Self {
            experiment: "topple".into(),
            scene,
            visibility,
            strategy,
            frames,
        })
    }

    pub fn run(&self, cfg: &TrackerConfig) -> TrackRun {
        let cfg = trial_config(cfg, &self.scene.part, self.strategy);
        track_frames(&self.frames, self.scene.part.cad.clone(), self.frames[0].truth_pose, &cfg)
    }

    pub fn score(&self, run: &TrackRun) -> TrialResult {
        TrialResult::evaluate(
            &self.experiment,
            &self.scene.part,
            self.visibility,
            self.scene.seed,
            self.strategy,
            &self.frames,
            run,
        )
    }
}

/// Trackers run side by side and again one after another.
#[derive(Debug, Clone)]
pub struct ParallelDemo {
    pub results: Vec<TrialResult>,
    pub concurrent_runs: Vec<TrackRun>,
    pub sequential_runs: Vec<TrackRun>,
    pub concurrent_secs: f64,
    pub sequential_secs: f64,
}

impl ParallelDemo {
    /// Whether every concurrent trajectory matches its sequential run bit for bit.
    pub fn identical(&self) -> bool {
        self.concurrent_runs.len() == self.sequential_runs.len()
            && self.concurrent_runs.iter().zip(&self.sequential_runs).all(|(a, b)| {
                a.lost_at == b.lost_at
                    && a.records.len() == b.records.len()
                    && a.records.iter().zip(&b.records).all(|(x, y)| x.bitwise_eq(y))
            })
    }

    /// Aggregate throughput of the concurrent run relative to the sequential one.
    pub fn scaling(&self) -> f64 {
        self.sequential_secs / self.concurrent_secs
    }
}

/// One thread per job, then the same jobs sequentially on the calling thread.
pub fn run_parallel_demo(jobs: &[TrialJob], cfg: &TrackerConfig) -> Result<ParallelDemo, HarnessError> {
    if jobs.iter().any(|j| j.frames.is_empty()) {
        return Err(HarnessError::Precondition("every job needs at least one frame".into()));
    }
    let start = Instant::now();
    let concurrent_runs: Vec<TrackRun> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|job| s.spawn(move || job.run(cfg))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("tracker thread panicked"))
            .collect()
    });
    let concurrent_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let sequential_runs: Vec<TrackRun> = jobs.iter().map(|job| job.run(cfg)).collect();
    let sequential_secs = start.elapsed().as_secs_f64();

    let results = jobs.iter().zip(&concurrent_runs).map(|(j, r)| j.score(r)).collect();
    Ok(ParallelDemo {
        results,
        concurrent_runs,
        sequential_runs,
        concurrent_secs,
        sequential_secs,
    })
}
