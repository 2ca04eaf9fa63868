//! Template-based pose tracking of a single part across a scan sequence.
//!
//! Each frame the template (a subset of the model's points) is registered
//! onto the scan with ICP, using the previous pose as the prior, and the
//! pose is chained as `T_i = T_rel * T_{i-1}`. The [`Strategy`] decides
//! what the template is and when it is re-extracted.

mod config;
mod log;
mod template;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Strategy, TrackerConfig};
pub use log::{read_trajectory, write_trajectory, TrajectoryRecord, TrajectoryWriter};
pub use template::{should_update, template_indices, template_update, Template};

use crate::geometry::{
    icp_register_indexed, transform_cloud, GeometryError, IcpResult, NearestNeighborIndex, PointCloud,
    RigidPose,
};
use crate::progress::{estimate_frame_progress, ProgressError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
    #[error("{what} needs at least 3 points, got {actual}")]
    TooFewPoints { what: &'static str, actual: usize },
    #[error("no model point lies within xi of the scan; wrong initial pose or model")]
    EmptyTemplate,
    #[error("tracking lost: {0}")]
    TrackingLost(String),
}

/// Depowdering phase as a function of progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// `eta <= eta1`: part mostly buried, no tracking.
    Phase1,
    /// `eta1 < eta <= eta2`: tracking runs.
    Phase2,
    /// `eta > eta2`: part essentially uncovered.
    Phase3,
}

pub fn classify_phase(eta: f64, cfg: &TrackerConfig) -> Phase {
    if eta <= cfg.eta1 {
        Phase::Phase1
    } else if eta <= cfg.eta2 {
        Phase::Phase2
    } else {
        Phase::Phase3
    }
}

/// Per-part tracking state. One instance per tracked part; `step` takes
/// `&mut self`, so a state is driven by one thread at a time while separate
/// instances share nothing mutable.
#[derive(Debug, Clone)]
pub struct TrackerState {
    cad: Arc<PointCloud>,
    cfg: TrackerConfig,
    current_pose: RigidPose,
    template: Template,
    transformed_cad: PointCloud,
    current_eta: f64,
    phase: Phase,
    frame_index: usize,
    tracking_active: bool,
}

/// What one call to [`TrackerState::step`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub pose: RigidPose,
    pub eta: f64,
    pub phase: Phase,
    /// `None` while tracking is held in phase 1.
    pub icp: Option<IcpResult>,
    pub template_updated: bool,
    pub template_len: usize,
}

/// Initializes tracking from the model, the known initial pose and the first scan.
pub fn init_tracker(
    cad: Arc<PointCloud>,
    t_init: RigidPose,
    first_scan: &PointCloud,
    cfg: &TrackerConfig,
) -> Result<TrackerState, TrackerError> {
    cfg.validate()?;
    if cad.len() < 3 {
        return Err(TrackerError::TooFewPoints { what: "model", actual: cad.len() });
    }
    if first_scan.len() < 3 {
        return Err(TrackerError::TooFewPoints { what: "scan", actual: first_scan.len() });
    }
    let transformed_cad = transform_cloud(&cad, &t_init);
    let scan_index = NearestNeighborIndex::new(first_scan);
    let matched = template_indices(&transformed_cad, &scan_index, cfg.xi_m());
    if matched.is_empty() {
        return Err(TrackerError::EmptyTemplate);
    }
    let eta = estimate_frame_progress(first_scan, &transformed_cad, cfg.xi_m(), &cfg.progress)
        .map(|fp| fp.eta)
        .unwrap_or(0.0);
    let indices = match cfg.strategy {
        Strategy::Vanilla => (0..cad.len()).collect(),
        Strategy::Continuous | Strategy::ConditionalUpdate => matched,
    };
    let phase = classify_phase(eta, cfg);
    Ok(TrackerState {
        template: Template::new(&cad, indices, t_init, eta),
        cad,
        cfg: *cfg,
        current_pose: t_init,
        transformed_cad,
        current_eta: eta,
        phase,
        frame_index: 0,
        tracking_active: !cfg.phase_gating || phase != Phase::Phase1,
    })
}

impl TrackerState {
    pub fn pose(&self) -> &RigidPose {
        &self.current_pose
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    pub fn cad(&self) -> &Arc<PointCloud> {
        &self.cad
    }

    pub fn transformed_cad(&self) -> &PointCloud {
        &self.transformed_cad
    }

    pub fn eta(&self) -> f64 {
        self.current_eta
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Frames processed successfully since initialization.
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn is_tracking(&self) -> bool {
        self.tracking_active
    }

    /// Processes one scan. On error the state is left untouched so the caller
    /// can retry with the next frame.
    pub fn step(&mut self, scan: &PointCloud) -> Result<StepReport, TrackerError> {
        if scan.len() < 3 {
            return Err(TrackerError::TooFewPoints { what: "scan", actual: scan.len() });
        }
        let cfg = self.cfg;
        let xi = cfg.xi_m();
        let scan_index = NearestNeighborIndex::new(scan);

        let mut activate = false;
        let (pose, transformed_cad, icp) = if self.tracking_active {
            let (pose, icp) = self.register(&scan_index)?;
            (pose, transform_cloud(&self.cad, &pose), Some(icp))
        } else {
            // Held at the initial pose; progress is still watched for the phase change.
            let eta = self.progress_or_last(scan, &self.transformed_cad);
            if classify_phase(eta, &cfg) == Phase::Phase1 {
                (self.current_pose, self.transformed_cad.clone(), None)
            } else {
                activate = true;
                let (pose, icp) = self.register(&scan_index)?;
                (pose, transform_cloud(&self.cad, &pose), Some(icp))
            }
        };

        let eta = self.progress_or_last(scan, &transformed_cad);
        let refresh = match cfg.strategy {
            Strategy::Vanilla => false,
            Strategy::Continuous => true,
            Strategy::ConditionalUpdate => should_update(&self.template, &pose, eta, &cfg),
        };
        let template = if refresh {
            let indices = template_indices(&transformed_cad, &scan_index, xi);
            if indices.is_empty() {
                return Err(TrackerError::TrackingLost("template became empty".into()));
            }
            Some(Template::new(&self.cad, indices, pose, eta))
        } else {
            None
        };

        if let Some(t) = template {
            self.template = t;
        }
        self.tracking_active |= activate;
        self.current_pose = pose;
        self.transformed_cad = transformed_cad;
        self.current_eta = eta;
        self.phase = classify_phase(eta, &cfg);
        self.frame_index += 1;
        Ok(StepReport {
            pose,
            eta,
            phase: self.phase,
            icp,
            template_updated: refresh,
            template_len: self.template.len(),
        })
    }

    fn register(&self, scan_index: &NearestNeighborIndex) -> Result<(RigidPose, IcpResult), TrackerError> {
        let source = match self.cfg.strategy {
            Strategy::Vanilla => &*self.cad,
            _ => &self.template.cloud,
        };
        let icp = icp_register_indexed(source, scan_index, &self.current_pose, &self.cfg.icp_params())
            .map_err(lost)?;
        let pose = icp.relative_pose.compose(&self.current_pose);
        Ok((pose, icp))
    }

    fn progress_or_last(&self, scan: &PointCloud, transformed_cad: &PointCloud) -> f64 {
        match estimate_frame_progress(scan, transformed_cad, self.cfg.xi_m(), &self.cfg.progress) {
            Ok(fp) => fp.eta,
            Err(ProgressError::Empty(_) | ProgressError::NoContour { .. } | ProgressError::DegenerateExtent { .. }) => {
                self.current_eta
            }
        }
    }
}

/// Functional form of [`TrackerState::step`]: returns the new state, pose and progress.
pub fn track_step(
    state: &TrackerState,
    scan: &PointCloud,
) -> Result<(TrackerState, RigidPose, f64), TrackerError> {
    let mut next = state.clone();
    let report = next.step(scan)?;
    Ok((next, report.pose, report.eta))
}

fn lost(e: GeometryError) -> TrackerError {
    TrackerError::TrackingLost(e.to_string())
}
