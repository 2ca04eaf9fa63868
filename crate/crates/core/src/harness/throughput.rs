use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::trial::{static_scene, StaticProtocol};
use super::HarnessError;
use crate::geometry::{PointCloud, RigidPose};
use crate::simulator::{generate_sequence, PartModel, ScanFrame};
use crate::tracker::{init_tracker, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThroughputProtocol {
    /// Frames timed after warm-up.
    pub frames: usize,
    /// Frames processed before the clock starts.
    pub warmup: usize,
    pub visibility: f64,
    pub noise_sigma_mm: f64,
    pub occluder: bool,
}

impl Default for ThroughputProtocol {
    fn default() -> Self {
        Self {
            frames: 200,
            warmup: 10,
            visibility: 0.5,
            noise_sigma_mm: 2.0,
            occluder: true,
        }
    }
}

/// Timing of one tracker over a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub fps: f64,
    pub frames_timed: usize,
    pub mean_scan_points: f64,
    pub mean_template_points: f64,
}

/// Static scene frames for timing: `warmup + frames` scans at 30 Hz.
pub fn throughput_frames(
    part: &Arc<PartModel>,
    seed: u64,
    protocol: &ThroughputProtocol,
) -> Result<Vec<ScanFrame>, HarnessError> {
    let fps = 30.0;
    let stat = StaticProtocol {
        fps,
        duration_s: (protocol.warmup + protocol.frames) as f64 / fps,
        noise_sigma_mm: protocol.noise_sigma_mm,
        occluder: protocol.occluder,
    };
    let scene = static_scene(part, protocol.visibility, seed, &stat);
    Ok(generate_sequence(&scene, None, stat.fps, stat.duration_s)?)
}

/// Steps one tracker on the calling thread. The first `warmup` frames are
/// processed but not timed.
pub fn measure_throughput(
    frames: &[ScanFrame],
    cad: Arc<PointCloud>,
    t_init: RigidPose,
    cfg: &TrackerConfig,
    warmup: usize,
) -> Result<Throughput, HarnessError> {
    if frames.len() <= warmup {
        return Err(HarnessError::Precondition(format!(
            "{} frames leave nothing to time after {warmup} warm-up frames",
            frames.len()
        )));
    }
    let mut state = init_tracker(cad, t_init, &frames[0].points, cfg)?;
    for f in &frames[..warmup] {
        state.step(&f.points)?;
    }
    let timed = &frames[warmup..];
    let mut template_points = 0usize;
    let start = Instant::now();
    for f in timed {
        template_points += state.step(&f.points)?.template_len;
    }
    let secs = start.elapsed().as_secs_f64();
    let n = timed.len() as f64;
    Ok(Throughput {
        fps: if secs > 0.0 { n / secs } else { f64::INFINITY },
        frames_timed: timed.len(),
        mean_scan_points: timed.iter().map(|f| f.points.len()).sum::<usize>() as f64 / n,
        mean_template_points: template_points as f64 / n,
    })
}
