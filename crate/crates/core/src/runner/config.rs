//! Scenario configuration, read from TOML. Every field has a default, so an
//! empty file (or no file) is the stock 15 s run at 128-bit keys.
//!
//! ```toml
//! scenario = "contact"
//! ts = 0.02
//! steps = 750
//! substeps = 20
//!
//! [crypto]
//! lambda = 128
//! seed = 1
//!
//! [gains]
//! gamma_xi = 1e6
//! gamma_phi = 1e6
//! gamma_alpha = 1e6
//!
//! [scaling]
//! alpha_x = 2.0
//! alpha_y = 1.0
//!
//! [plant]
//! j_true = 1e-4
//! a2 = 0.1
//!
//! [operator]
//! stiffness = 4.0
//! damping = 0.002
//! setpoint_hold = true
//! free = { kind = "sine", amplitude = 0.6, period = 6.0, ramp = 1.0 }
//! contact = { kind = "waypoints", points = [[0, 0], [1, 0], [5, 0.3], [11, 0.3], [14, 0], [15, 0]] }
//!
//! [contact]
//! wall_angle = 0.05
//! stiffness = 10.0
//! damping = 0.02
//!
//! [verify]
//! tracking_rms_max = 0.05
//! third_law_ratio_max = 0.05
//! contact_window = [7.0, 10.5]
//! equivalence_max = 1e-3
//!
//! [paths]
//! controller_matrix = "phi.txt"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::codec::QuantizationGains;
use crate::controller::{default_phi, parse_matrix_file, ControllerMatrix};
use crate::crypto::MIN_KEY_BITS;
use crate::memory::ScalingParams;
use crate::plant::{ContactModel, OperatorProfile, PlantParams, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    #[default]
    Free,
    Contact,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Free => "free",
            Scenario::Contact => "contact",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free" => Ok(Scenario::Free),
            "contact" => Ok(Scenario::Contact),
            other => Err(RunnerError::Config(format!("unknown scenario {other:?} (free|contact)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryptoConfig {
    pub lambda: u64,
    pub seed: u64,
}

impl Default for CryptoConfig {
    fn default() -> Self {
        Self { lambda: 128, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub stiffness: f64,
    pub damping: f64,
    /// Sample the setpoint once per control period and hold it in between,
    /// like any other discrete command. With a continuously ramped setpoint
    /// the shipped controller settles into contact with a ~25% force
    /// imbalance instead of ~0.3%: nothing in `Φ` feeds force back, so the
    /// static force split is whatever the approach left behind.
    pub setpoint_hold: bool,
    pub free: Trajectory,
    pub contact: Trajectory,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            stiffness: 4.0,
            damping: 0.002,
            setpoint_hold: true,
            free: Trajectory::Sine { amplitude: 0.6, period: 6.0, ramp: 1.0 },
            // press into the wall at 0.05 rad, hold, release
            contact: Trajectory::Waypoints {
                points: vec![[0.0, 0.0], [1.0, 0.0], [5.0, 0.3], [11.0, 0.3], [14.0, 0.0], [15.0, 0.0]],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// RMS of loaded follower angle vs `α_x ·` saved leader angle (rad).
    pub tracking_rms_max: f64,
    /// Mean `|τ̂e_l + τ̂e_f|` over mean `|τ̂e_l|` during sustained contact.
    pub third_law_ratio_max: f64,
    /// Seconds `[start, end]` of sustained contact.
    pub contact_window: [f64; 2],
    /// Largest tolerated `|ψ̃ - ψ|` in either phase.
    pub equivalence_max: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { tracking_rms_max: 0.05, third_law_ratio_max: 0.05, contact_window: [7.0, 10.5], equivalence_max: 1e-3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Controller matrix file; the published matrix when absent.
    pub controller_matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub ts: f64,
    pub steps: usize,
    pub substeps: usize,
    pub crypto: CryptoConfig,
    pub gains: QuantizationGains,
    pub scaling: ScalingParams,
    pub plant: PlantParams,
    pub operator: OperatorConfig,
    pub contact: ContactModel,
    pub verify: VerifyConfig,
    pub paths: PathsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Free,
            ts: 0.02,
            steps: 750,
            substeps: 20,
            crypto: CryptoConfig::default(),
            gains: QuantizationGains::default(),
            scaling: ScalingParams::default(),
            plant: PlantParams::default(),
            operator: OperatorConfig::default(),
            contact: ContactModel::default(),
            verify: VerifyConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RunnerError> {
        toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))
    }

    /// Relative paths inside the file are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(m), Some(dir)) = (&cfg.paths.controller_matrix, path.parent()) {
            if m.is_relative() {
                cfg.paths.controller_matrix = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.ts
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |msg: String| Err(RunnerError::Config(msg));
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return bad(format!("ts must be positive, got {}", self.ts));
        }
        if self.steps == 0 || self.substeps == 0 {
            return bad("steps and substeps must be at least 1".into());
        }
        if self.crypto.lambda < MIN_KEY_BITS {
            return bad(format!("lambda must be at least {MIN_KEY_BITS}"));
        }
        self.gains.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        if !(self.scaling.alpha_x.is_finite() && self.scaling.alpha_y.is_finite()) {
            return bad("scaling factors must be finite".into());
        }
        self.plant.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        self.contact.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        self.operator_profile()
            .validate(self.duration())
            .map_err(|e| RunnerError::Config(format!("operator {}: {e}", self.scenario)))?;
        let [w0, w1] = self.verify.contact_window;
        if !(w0 < w1) {
            return bad(format!("contact_window [{w0}, {w1}] is empty"));
        }
        Ok(())
    }

    /// The leader's operator for this config's scenario.
    pub fn operator_profile(&self) -> OperatorProfile {
        let trajectory = match self.scenario {
            Scenario::Free => self.operator.free.clone(),
            Scenario::Contact => self.operator.contact.clone(),
        };
        OperatorProfile { trajectory, stiffness: self.operator.stiffness, damping: self.operator.damping }
    }

    /// The follower's environment in `scenario`: the wall exists only in contact runs.
    pub fn environment(&self, scenario: Scenario) -> ContactModel {
        ContactModel { enabled: self.contact.enabled && scenario == Scenario::Contact, ..self.contact }
    }

    pub fn controller_matrix(&self) -> Result<ControllerMatrix, RunnerError> {
        match &self.paths.controller_matrix {
            None => Ok(default_phi()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
                parse_matrix_file(&text).map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}
