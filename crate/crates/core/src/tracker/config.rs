use serde::{Deserialize, Serialize};

use super::TrackerError;
use crate::geometry::IcpParams;
use crate::progress::ProgressConfig;

/// Template handling policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum Strategy {
    /// Whole model as the template, never updated.
    #[serde(rename = "vanilla")]
    Vanilla,
    /// Template re-extracted from every scan.
    #[serde(rename = "continuous")]
    Continuous,
    /// Template re-extracted only after a significant pose or progress change.
    #[default]
    #[serde(rename = "cuicp")]
    ConditionalUpdate,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::ConditionalUpdate, Strategy::Continuous, Strategy::Vanilla];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Vanilla => "vanilla",
            Strategy::Continuous => "continuous",
            Strategy::ConditionalUpdate => "cuicp",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = TrackerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Strategy::Vanilla),
            "continuous" => Ok(Strategy::Continuous),
            "cuicp" | "cu-icp" | "conditional" => Ok(Strategy::ConditionalUpdate),
            other => Err(TrackerError::InvalidConfig(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Tracker thresholds. Units are in the field names; the file format uses
/// the same keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub strategy: Strategy,
    /// Rotation change that triggers a template update, degrees.
    pub delta1_deg: f64,
    /// Translation change that triggers a template update, cm.
    pub delta2_cm: f64,
    /// Progress change that triggers a template update, fraction.
    pub delta3: f64,
    /// Template update distance threshold, cm.
    pub xi_cm: f64,
    /// Progress at or below which no tracking runs.
    pub eta1: f64,
    /// Progress above which the part counts as uncovered.
    pub eta2: f64,
    pub icp_max_iterations: usize,
    /// ICP stops when the RMSE improves by less than this, meters.
    pub icp_epsilon_m: f64,
    /// Correspondence rejection distance, cm. Defaults to `2 * xi_cm`.
    pub correspondence_cutoff_cm: Option<f64>,
    /// Hold the initial pose while progress is at or below `eta1`.
    pub phase_gating: bool,
    pub progress: ProgressConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::ConditionalUpdate,
            delta1_deg: 30.0,
            delta2_cm: 5.0,
            delta3: 0.15,
            xi_cm: 1.0,
            eta1: 0.30,
            eta2: 0.85,
            icp_max_iterations: 50,
            icp_epsilon_m: 1e-6,
            correspondence_cutoff_cm: None,
            phase_gating: true,
            progress: ProgressConfig::default(),
        }
    }
}

impl TrackerConfig {
    /// Parses and validates a config file body.
    pub fn from_toml(text: &str) -> Result<Self, TrackerError> {
        let cfg: Self = toml::from_str(text).map_err(|e| TrackerError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TrackerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrackerError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn xi_m(&self) -> f64 {
        self.xi_cm / 100.0
    }

    pub fn delta2_m(&self) -> f64 {
        self.delta2_cm / 100.0
    }

    pub fn cutoff_m(&self) -> f64 {
        self.correspondence_cutoff_cm.unwrap_or(2.0 * self.xi_cm) / 100.0
    }

    pub fn icp_params(&self) -> IcpParams {
        IcpParams {
            max_iterations: self.icp_max_iterations,
            convergence_epsilon: self.icp_epsilon_m,
            correspondence_cutoff: self.cutoff_m(),
        }
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let fail = |msg: &str| Err(TrackerError::InvalidConfig(msg.to_string()));
        if !(self.delta1_deg > 0.0) {
            return fail("delta1_deg must be > 0");
        }
        if !(self.delta2_cm > 0.0) {
            return fail("delta2_cm must be > 0");
        }
        if !(self.delta3 > 0.0 && self.delta3 < 1.0) {
            return fail("delta3 must lie in (0, 1)");
        }
        if !(self.xi_cm > 0.0) {
            return fail("xi_cm must be > 0");
        }
        if !(0.0 < self.eta1 && self.eta1 < self.eta2 && self.eta2 <= 1.0) {
            return fail("thresholds must satisfy 0 < eta1 < eta2 <= 1");
        }
        if self.icp_max_iterations == 0 {
            return fail("icp_max_iterations must be >= 1");
        }
        if !(self.icp_epsilon_m >= 0.0) {
            return fail("icp_epsilon_m must be >= 0");
        }
        if self.correspondence_cutoff_cm.is_some_and(|c| !(c > 0.0)) {
            return fail("correspondence_cutoff_cm must be > 0");
        }
        let p = &self.progress;
        if !(p.contour_min_cm >= 0.0 && p.contour_max_cm > p.contour_min_cm) {
            return fail("contour band must satisfy 0 <= contour_min_cm < contour_max_cm");
        }
        if !(p.widen_factor > 1.0) {
            return fail("widen_factor must be > 1");
        }
        Ok(())
    }
}
