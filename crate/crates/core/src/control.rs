//! Three independent SISO loops: pitch (PI plus rate damping) on the elevator,
//! yaw (P plus rate damping) on the rudder, altitude (PI plus climb-rate
//! damping around a cruise feed-forward) on the flap frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::SensorFrame;
use crate::units::wrap_angle;
use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlGains {
    /// Elevator rad per rad of pitch error.
    pub pitch_kp: f64,
    /// Elevator rad per rad·s of integrated pitch error.
    pub pitch_ki: f64,
    /// Elevator rad per rad/s of pitch rate. Zero gives the plain PI loop.
    pub pitch_rate_kd: f64,
    pub yaw_kp: f64,
    pub yaw_rate_kd: f64,
    /// Hz per m of altitude error.
    pub alt_kp: f64,
    /// Hz per m·s of integrated altitude error.
    pub alt_ki: f64,
    /// Hz per m/s of climb rate. Zero gives the plain PI loop.
    #[serde(default)]
    pub alt_rate_kd: f64,
    #[serde(rename = "pitch_integrator_limit_rad_s")]
    pub pitch_integrator_limit: f64,
    #[serde(rename = "alt_integrator_limit_m_s")]
    pub alt_integrator_limit: f64,
    #[serde(rename = "elevator_limit_rad")]
    pub elevator_limit: f64,
    #[serde(rename = "rudder_limit_rad")]
    pub rudder_limit: f64,
}

impl ControlGains {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("gains.pitch_kp", self.pitch_kp),
            ("gains.pitch_ki", self.pitch_ki),
            ("gains.pitch_rate_kd", self.pitch_rate_kd),
            ("gains.yaw_kp", self.yaw_kp),
            ("gains.yaw_rate_kd", self.yaw_rate_kd),
            ("gains.alt_kp", self.alt_kp),
            ("gains.alt_ki", self.alt_ki),
            ("gains.alt_rate_kd", self.alt_rate_kd),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        for (key, v) in [
            ("gains.pitch_integrator_limit_rad_s", self.pitch_integrator_limit),
            ("gains.alt_integrator_limit_m_s", self.alt_integrator_limit),
            ("gains.elevator_limit_rad", self.elevator_limit),
            ("gains.rudder_limit_rad", self.rudder_limit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub elevator: f64,
    pub rudder: f64,
    pub flap_freq_cmd: f64,
    pub leg_angle_cmd: f64,
    pub claw_trigger: bool,
}

impl ControlCommand {
    /// Zero surfaces, neutral leg, claw armed but not triggered.
    pub fn neutral(flap_freq_cmd: f64) -> Self {
        ControlCommand {
            elevator: 0.0,
            rudder: 0.0,
            flap_freq_cmd,
            leg_angle_cmd: 0.0,
            claw_trigger: false,
        }
    }

    pub fn within_limits(&self, gains: &ControlGains, params: &VehicleParams) -> bool {
        self.elevator.abs() <= gains.elevator_limit
            && self.rudder.abs() <= gains.rudder_limit
            && (0.0..=params.max_flap_freq).contains(&self.flap_freq_cmd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    pub pitch_integrator: f64,
    pub alt_integrator: f64,
    pub last_update_time: f64,
    /// Command re-emitted while frames are invalid.
    pub last_command: ControlCommand,
    pub dropouts: u32,
}

impl ControlState {
    pub fn new(initial: ControlCommand) -> Self {
        ControlState {
            pitch_integrator: 0.0,
            alt_integrator: 0.0,
            last_update_time: 0.0,
            last_command: initial,
            dropouts: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setpoints {
    pub pitch_ref: f64,
    pub yaw_ref: f64,
    pub alt_ref: f64,
    pub flapping_enabled: bool,
    /// Freeze elevator and rudder at their last commanded values.
    pub hold_surfaces: bool,
}

impl Setpoints {
    pub fn neutral() -> Self {
        Setpoints {
            pitch_ref: 0.0,
            yaw_ref: 0.0,
            alt_ref: 0.0,
            flapping_enabled: false,
            hold_surfaces: false,
        }
    }
}

/// Integrate `error` unless the raw output already exceeds `[lo, hi]` in the
/// direction the error would push it.
#[allow(clippy::too_many_arguments)]
fn clamped_pi(
    proportional: f64,
    ki: f64,
    integrator: f64,
    error: f64,
    dt: f64,
    integrator_limit: f64,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    let trial = (integrator + error * dt).clamp(-integrator_limit, integrator_limit);
    let raw = proportional + ki * trial;
    let deepening = (raw > hi && error * ki > 0.0) || (raw < lo && error * ki < 0.0);
    let saturated_by_p = (proportional > hi && error > 0.0) || (proportional < lo && error < 0.0);
    let integrator = if deepening || saturated_by_p { integrator } else { trial };
    let out = (proportional + ki * integrator).clamp(lo, hi);
    (out, integrator)
}

pub fn pitch_loop(
    refs: &Setpoints,
    pitch: f64,
    pitch_rate: f64,
    cs: &ControlState,
    gains: &ControlGains,
    dt: f64,
) -> (f64, ControlState) {
    let error = refs.pitch_ref - pitch;
    let proportional = gains.pitch_kp * error - gains.pitch_rate_kd * pitch_rate;
    let (elevator, integrator) = clamped_pi(
        proportional,
        gains.pitch_ki,
        cs.pitch_integrator,
        error,
        dt,
        gains.pitch_integrator_limit,
        -gains.elevator_limit,
        gains.elevator_limit,
    );
    let mut next = cs.clone();
    next.pitch_integrator = integrator;
    (elevator, next)
}

pub fn yaw_loop(refs: &Setpoints, yaw: f64, yaw_rate: f64, gains: &ControlGains) -> f64 {
    let error = wrap_angle(refs.yaw_ref - yaw);
    (gains.yaw_kp * error - gains.yaw_rate_kd * yaw_rate).clamp(-gains.rudder_limit, gains.rudder_limit)
}

pub fn altitude_loop(
    refs: &Setpoints,
    z: f64,
    climb_rate: f64,
    cs: &ControlState,
    gains: &ControlGains,
    params: &VehicleParams,
    dt: f64,
) -> (f64, ControlState) {
    let error = refs.alt_ref - z;
    let proportional = params.cruise_flap_freq + gains.alt_kp * error - gains.alt_rate_kd * climb_rate;
    let (freq, integrator) = clamped_pi(
        proportional,
        gains.alt_ki,
        cs.alt_integrator,
        error,
        dt,
        gains.alt_integrator_limit,
        0.0,
        params.max_flap_freq,
    );
    let mut next = cs.clone();
    next.alt_integrator = integrator;
    (freq, next)
}

/// One controller period. Invalid frames repeat the previous command and
/// count as a dropout.
pub fn controller_update(
    frame: &SensorFrame,
    refs: &Setpoints,
    cs: &ControlState,
    gains: &ControlGains,
    params: &VehicleParams,
    dt: f64,
) -> (ControlCommand, ControlState) {
    if !frame.valid {
        let mut next = cs.clone();
        next.dropouts += 1;
        next.last_update_time = frame.timestamp;
        return (cs.last_command.clone(), next);
    }

    let (elevator, rudder, mut next) = if refs.hold_surfaces {
        (cs.last_command.elevator, cs.last_command.rudder, cs.clone())
    } else {
        let (elevator, next) = pitch_loop(refs, frame.pitch, frame.pitch_rate, cs, gains, dt);
        let rudder = yaw_loop(refs, frame.yaw, frame.yaw_rate, gains);
        (elevator, rudder, next)
    };

    let flap_freq_cmd = if refs.flapping_enabled {
        let (freq, after) = altitude_loop(refs, frame.position.z, frame.climb_rate, &next, gains, params, dt);
        next = after;
        freq
    } else {
        0.0
    };

    let cmd = ControlCommand {
        elevator,
        rudder,
        flap_freq_cmd,
        leg_angle_cmd: 0.0,
        claw_trigger: false,
    };
    next.last_command = cmd.clone();
    next.last_update_time = frame.timestamp;
    (cmd, next)
}
