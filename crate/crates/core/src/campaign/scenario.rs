//! The scenario file: one TOML document with a table per subsystem. Unknown
//! keys are rejected and every physical key names its unit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::ControlGains;
use crate::error::{Error, Result};
use crate::fsm::{Guidance, TriggerConfig};
use crate::grasp::GraspConfig;
use crate::perception::{DetectorModel, MocapModel};
use crate::vehicle::{BranchSpec, Environment, LaunchConfig, VehicleParams, MAX_DT};

use super::dispersion::Dispersion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "dt_s")]
    pub dt: f64,
    #[serde(rename = "controller_rate_hz")]
    pub controller_rate: f64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegServoConfig {
    #[serde(rename = "update_rate_hz")]
    pub update_rate: f64,
    /// Run misalignment compensation during the approach. Off freezes the leg at zero.
    pub compensation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub sim: SimConfig,
    pub vehicle: VehicleParams,
    pub environment: Environment,
    pub branch: BranchSpec,
    pub launch: LaunchConfig,
    pub gains: ControlGains,
    pub guidance: Guidance,
    pub triggers: TriggerConfig,
    pub mocap: MocapModel,
    pub detector: DetectorModel,
    pub leg_servo: LegServoConfig,
    pub grasp: GraspConfig,
    #[serde(default)]
    pub dispersions: Vec<Dispersion>,
}

/// Number of physics steps per period of a `rate_hz` process, if integral.
pub fn steps_per_period(rate_hz: f64, dt: f64) -> Option<u64> {
    let ratio = 1.0 / (rate_hz * dt);
    let rounded = ratio.round();
    if rounded >= 1.0 && (ratio - rounded).abs() < 1e-6 {
        Some(rounded as u64)
    } else {
        None
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<scenario>"))
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario fields are all representable in TOML")
    }

    pub fn save(&self, path: impl AsRef<Path>, header: &str) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for line in header.lines() {
            text.push('#');
            if !line.is_empty() {
                text.push(' ');
                text.push_str(line);
            }
            text.push('\n');
        }
        if !header.is_empty() {
            text.push('\n');
        }
        text.push_str(&self.to_toml_string());
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 over the canonical JSON form of the loaded scenario.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes to JSON");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.environment.validate()?;
        self.branch.validate()?;
        self.launch.validate()?;
        self.gains.validate()?;
        self.guidance.validate()?;
        self.triggers.validate()?;
        self.mocap.validate()?;
        self.detector.validate()?;
        self.grasp.validate()?;

        let dt = self.sim.dt;
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::config("sim.dt_s", format!("must lie in (0, {MAX_DT}], got {dt}")));
        }
        for (key, rate) in [
            ("sim.controller_rate_hz", self.sim.controller_rate),
            ("leg_servo.update_rate_hz", self.leg_servo.update_rate),
            ("mocap.rate_hz", self.mocap.rate),
        ] {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::config(key, "must be > 0"));
            }
            if steps_per_period(rate, dt).is_none() {
                return Err(Error::config(
                    key,
                    format!("period must be a whole number of {dt} s physics steps"),
                ));
            }
        }
        for (i, d) in self.dispersions.iter().enumerate() {
            d.validate(i)?;
        }
        Ok(())
    }

    pub fn without_dispersions(&self) -> Self {
        Scenario {
            dispersions: Vec::new(),
            ..self.clone()
        }
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        let mut s = self.clone();
        s.sim.dt = dt;
        s.validate()?;
        Ok(s)
    }
}

/// The calibrated nominal scenario shipped with the crate.
pub const NOMINAL_SCENARIO: &str = include_str!("../../../../scenarios/nominal.toml");

/// The uncalibrated starting point the calibration consumes.
pub const BASE_SCENARIO: &str = include_str!("../../../../scenarios/base.toml");

pub fn nominal() -> Scenario {
    Scenario::from_toml_str(NOMINAL_SCENARIO).expect("committed nominal scenario is valid")
}

pub fn base() -> Scenario {
    Scenario::from_toml_str(BASE_SCENARIO).expect("committed base scenario is valid")
}
