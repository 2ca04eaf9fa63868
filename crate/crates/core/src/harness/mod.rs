//! Experiment protocols, metrics and reports.
//!
//! Static trials track a stationary part at a fixed powder level while an
//! occluder orbits it. Push trials move the part through the powder. Speed
//! trials replay a slow motion sequence faster and faster until tracking
//! fails. Throughput trials time a single tracker on large frames.

mod bench;
mod metrics;
mod parallel;
mod report;
mod speed;
mod throughput;
mod trial;

use thiserror::Error;

pub use bench::{
    bench_push, bench_speed, bench_static, bench_throughput, bench_tracker_default, hardware_description,
    parallel_scenarios, report, run_push_suite, run_speed_suite, run_static_suite, run_throughput_suite, BenchConfig,
    Scored, SpeedBench, StaticBench, ThroughputBench, ThroughputEntry,
};
pub use metrics::{
    is_success, max_relative_drift, mean, rotation_error_deg, symmetric_rotation_error_deg, translation_error_cm,
    LOST_ROTATION_DEG, LOST_TRANSLATION_CM, SUCCESS_ROTATION_DEG, SUCCESS_TRANSLATION_CM,
};
pub use parallel::{run_parallel_demo, ParallelDemo, TrialJob};
pub use report::{
    push_summary, push_table, read_jsonl, speed_orderings, speed_summary, speed_table, static_cells, static_orderings,
    static_summary, static_table, success_rates, write_jsonl, CellStats, PartOrdering, Table,
};
pub use speed::{
    find_max_factor, run_speed_condition, speed_frames, speed_setup, tracks_at_factor, MotionKind, SpeedEntry,
    SpeedProtocol,
};
pub use throughput::{measure_throughput, throughput_frames, Throughput, ThroughputProtocol};
pub use trial::{
    push_frames, push_setup, random_resting_pose, run_push_trial, run_static_trial, score_frames, setup_rng,
    static_frames, static_scene, track_frames, trial_config, PushProtocol, PushSetup, StaticProtocol, TrackRun,
    TrialResult, FLOOR_Z,
};

use crate::simulator::SimulatorError;
use crate::tracker::TrackerError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Precondition(String),
}
