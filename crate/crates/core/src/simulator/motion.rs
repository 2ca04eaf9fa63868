use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::SimulatorError;
use crate::geometry::RigidPose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub time: f64,
    pub pose: RigidPose,
}

/// Scripted part motion: keyframed poses with linear translation and
/// spherical-linear rotation in between, held constant outside the range.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    keyframes: Vec<Keyframe>,
}

impl MotionScript {
    pub fn new(keyframes: Vec<Keyframe>) -> Result<Self, SimulatorError> {
        if keyframes.is_empty() {
            return Err(SimulatorError::InvalidScript("no keyframes".into()));
        }
        if keyframes.iter().any(|k| !k.time.is_finite()) {
            return Err(SimulatorError::InvalidScript("keyframe time is not finite".into()));
        }
        if keyframes.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(SimulatorError::InvalidScript("keyframe times must be strictly increasing".into()));
        }
        Ok(Self { keyframes })
    }

    /// A script that never moves.
    pub fn stationary(pose: RigidPose) -> Self {
        Self {
            keyframes: vec![Keyframe { time: 0.0, pose }],
        }
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    pub fn start_time(&self) -> f64 {
        self.keyframes[0].time
    }

    pub fn end_time(&self) -> f64 {
        self.keyframes[self.keyframes.len() - 1].time
    }

    pub fn pose_at(&self, time: f64) -> RigidPose {
        let k = &self.keyframes;
        if time <= k[0].time {
            return k[0].pose;
        }
        if time >= k[k.len() - 1].time {
            return k[k.len() - 1].pose;
        }
        // First keyframe strictly after `time`; it exists and is not the first.
        let next = k.partition_point(|kf| kf.time <= time);
        let (a, b) = (&k[next - 1], &k[next]);
        let s = (time - a.time) / (b.time - a.time);
        interpolate(&a.pose, &b.pose, s)
    }
}

/// Pose at fraction `s` between `a` and `b` along the shorter rotation arc.
pub fn interpolate(a: &RigidPose, b: &RigidPose, s: f64) -> RigidPose {
    let t = a.translation() + (b.translation() - a.translation()) * s;
    let qa = a.quaternion();
    let mut rel = qa.inverse() * b.quaternion();
    if rel.w < 0.0 {
        rel = UnitQuaternion::new_unchecked(-rel.into_inner());
    }
    let q = match rel.axis_angle() {
        Some((axis, angle)) => qa * UnitQuaternion::from_axis_angle(&axis, angle * s),
        None => qa,
    };
    RigidPose::from_quaternion(&q, t)
}

/// File form of a keyframe. Translation in cm, rotation as roll/pitch/yaw in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeConfig {
    pub time_s: f64,
    pub translation_cm: [f64; 3],
    #[serde(default)]
    pub rpy_deg: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionScriptConfig {
    pub keyframes: Vec<KeyframeConfig>,
}

impl MotionScriptConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimulatorError> {
        toml::from_str(text).map_err(|e| SimulatorError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimulatorError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimulatorError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn build(&self) -> Result<MotionScript, SimulatorError> {
        MotionScript::new(
            self.keyframes
                .iter()
                .map(|k| Keyframe {
                    time: k.time_s,
                    pose: RigidPose::from_rpy_deg(k.rpy_deg, Vector3::from(k.translation_cm) / 100.0),
                })
                .collect(),
        )
    }
}
