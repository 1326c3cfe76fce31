//! Perch decision at the branch plane: geometric capture during claw closure,
//! hold against the centre-of-mass moment, and peak impact force.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{BranchSpec, VehicleParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub time: f64,
    pub claw_tip_position: Vector3<f64>,
    pub relative_speed: f64,
    /// Claw tip minus branch axis, vertical.
    pub vertical_miss: f64,
    /// Claw tip minus branch centre, along the branch axis.
    pub lateral_miss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    MissVertical,
    MissLateral,
    SlipDuringClosure,
    HoldTorqueExceeded,
    Overload,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::None => "none",
            FailureReason::MissVertical => "miss_vertical",
            FailureReason::MissLateral => "miss_lateral",
            FailureReason::SlipDuringClosure => "slip_during_closure",
            FailureReason::HoldTorqueExceeded => "hold_torque_exceeded",
            FailureReason::Overload => "overload",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspResult {
    pub captured: bool,
    pub held: bool,
    pub impact_force: f64,
    pub failure_reason: FailureReason,
}

impl GraspResult {
    pub fn perched(&self) -> bool {
        self.failure_reason == FailureReason::None
    }
}

/// Contact-side settings that are not properties of the airframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspConfig {
    /// Distance over which the robot is brought to rest by the branch.
    #[serde(rename = "stop_distance_m")]
    pub stop_distance: f64,
    /// Horizontal distance from claw axis to centre of mass once perched.
    #[serde(rename = "com_offset_m")]
    pub com_offset: f64,
    #[serde(rename = "overload_force_n")]
    pub overload_force: f64,
}

impl GraspConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_distance.is_finite() && self.stop_distance > 0.0) {
            return Err(Error::config("grasp.stop_distance_m", "must be > 0"));
        }
        if !(self.com_offset.is_finite() && self.com_offset >= 0.0) {
            return Err(Error::config("grasp.com_offset_m", "must be >= 0"));
        }
        if !(self.overload_force.is_finite() && self.overload_force > 0.0) {
            return Err(Error::config("grasp.overload_force_n", "must be > 0"));
        }
        Ok(())
    }
}

pub fn capture_check(ev: &ContactEvent, params: &VehicleParams, branch: &BranchSpec) -> (bool, FailureReason) {
    let vertical_window = params.claw_aperture / 2.0 - branch.radius;
    if ev.vertical_miss.abs() > vertical_window {
        return (false, FailureReason::MissVertical);
    }
    if ev.lateral_miss.abs() > branch.length / 2.0 {
        return (false, FailureReason::MissLateral);
    }
    if ev.relative_speed * params.claw_close_time > params.capture_depth_margin {
        return (false, FailureReason::SlipDuringClosure);
    }
    (true, FailureReason::None)
}

pub fn hold_check(com_offset: f64, params: &VehicleParams, gravity: f64) -> (bool, FailureReason) {
    if params.mass * gravity * com_offset <= params.claw_torque * params.pad_friction_coeff {
        (true, FailureReason::None)
    } else {
        (false, FailureReason::HoldTorqueExceeded)
    }
}

/// Constant-deceleration peak force.
pub fn impact_force(ev: &ContactEvent, params: &VehicleParams, stop_distance: f64) -> Result<f64> {
    if stop_distance.is_nan() || stop_distance <= 0.0 {
        return Err(Error::config(
            "grasp.stop_distance_m",
            format!("must be > 0, got {stop_distance}"),
        ));
    }
    Ok(params.mass * ev.relative_speed * ev.relative_speed / (2.0 * stop_distance))
}

pub fn evaluate_grasp(
    ev: &ContactEvent,
    params: &VehicleParams,
    branch: &BranchSpec,
    cfg: &GraspConfig,
    gravity: f64,
) -> Result<GraspResult> {
    let force = impact_force(ev, params, cfg.stop_distance)?;
    let (captured, reason) = capture_check(ev, params, branch);
    if !captured {
        return Ok(GraspResult {
            captured,
            held: false,
            impact_force: force,
            failure_reason: reason,
        });
    }
    let (held, reason) = hold_check(cfg.com_offset, params, gravity);
    let failure_reason = if !held {
        reason
    } else if force >= cfg.overload_force {
        FailureReason::Overload
    } else {
        FailureReason::None
    };
    Ok(GraspResult {
        captured,
        held,
        impact_force: force,
        failure_reason,
    })
}
