//! Airframe, environment and branch data, plus the reduced rigid-body model.
//!
//! The state carries three translational degrees of freedom, pitch and yaw with
//! their rates, and the flap phase. Roll is not modelled. Aerodynamics use a
//! flat-plate closure; flapping adds a thrust along the body axis that scales
//! with the square of the flap frequency and a body-vertical oscillation.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::control::ControlCommand;
use crate::error::{Error, Result};
use crate::units::{deg, to_degrees, wrap_angle};

/// Highest exit speed the launcher rail can reach.
pub const MAX_RAIL_EXIT_SPEED: f64 = 10.0;

/// Hard cap on the physics step.
pub const MAX_DT: f64 = 0.005;

/// Closed angle interval in radians (stored in degrees on disk).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    pub min: f64,
    pub max: f64,
}

impl AngleRange {
    pub fn clamp(&self, angle: f64) -> f64 {
        angle.clamp(self.min, self.max)
    }

    pub fn contains(&self, angle: f64) -> bool {
        angle >= self.min && angle <= self.max
    }
}

impl Serialize for AngleRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [to_degrees(self.min), to_degrees(self.max)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for AngleRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [min, max] = <[f64; 2]>::deserialize(d)?;
        Ok(AngleRange {
            min: min.to_radians(),
            max: max.to_radians(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    #[serde(rename = "mass_kg")]
    pub mass: f64,
    #[serde(rename = "wingspan_m")]
    pub wingspan: f64,
    /// Effective lifting area of the flat-plate closure.
    #[serde(rename = "wing_area_m2")]
    pub wing_area: f64,
    #[serde(rename = "pitch_inertia_kgm2")]
    pub pitch_inertia: f64,
    #[serde(rename = "yaw_inertia_kgm2")]
    pub yaw_inertia: f64,
    /// Mean thrust per squared flap frequency, N·s².
    #[serde(rename = "flap_thrust_coeff_ns2")]
    pub flap_thrust_coeff: f64,
    /// Peak body-vertical oscillatory force at `max_flap_freq`.
    #[serde(rename = "flap_osc_amplitude_n")]
    pub flap_osc_amplitude: f64,
    #[serde(rename = "max_flap_freq_hz")]
    pub max_flap_freq: f64,
    /// Feed-forward flap frequency of the altitude loop and the frequency at release.
    #[serde(rename = "cruise_flap_freq_hz")]
    pub cruise_flap_freq: f64,
    #[serde(rename = "elevator_effectiveness_nm_per_rad_per_mps2")]
    pub elevator_effectiveness: f64,
    #[serde(rename = "rudder_effectiveness_nm_per_rad_per_mps2")]
    pub rudder_effectiveness: f64,
    /// Static pitch moment per radian of angle of attack per (m/s)².
    #[serde(rename = "pitch_stiffness_nm_per_rad_per_mps2")]
    pub pitch_stiffness: f64,
    /// Weathercock yaw moment per radian of sideslip per (m/s)².
    #[serde(rename = "yaw_stiffness_nm_per_rad_per_mps2")]
    pub yaw_stiffness: f64,
    #[serde(rename = "pitch_damping_nms_per_rad")]
    pub pitch_damping: f64,
    #[serde(rename = "yaw_damping_nms_per_rad")]
    pub yaw_damping: f64,
    #[serde(rename = "parasitic_drag_coeff")]
    pub parasitic_drag_coeff: f64,
    /// Pivot (at the reference point) to claw tip.
    #[serde(rename = "leg_length_m")]
    pub leg_length: f64,
    /// Angle of the leg below the body forward axis at zero leg angle.
    #[serde(rename = "leg_mount_angle_deg", with = "deg")]
    pub leg_mount_angle: f64,
    #[serde(rename = "leg_angle_range_deg")]
    pub leg_angle_range: AngleRange,
    #[serde(rename = "leg_max_rate_dps", with = "deg")]
    pub leg_max_rate: f64,
    #[serde(rename = "claw_aperture_m")]
    pub claw_aperture: f64,
    #[serde(rename = "claw_close_time_s")]
    pub claw_close_time: f64,
    #[serde(rename = "claw_torque_nm")]
    pub claw_torque: f64,
    /// Multiplier on claw torque available to resist the centre-of-mass moment.
    #[serde(rename = "pad_friction_coeff")]
    pub pad_friction_coeff: f64,
    /// Forward travel the closing claw tolerates before the branch slips out.
    #[serde(rename = "capture_depth_margin_m")]
    pub capture_depth_margin: f64,
}

fn positive(key: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be > 0, got {value}")))
    }
}

fn non_negative(key: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be >= 0, got {value}")))
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        positive("vehicle.mass_kg", self.mass)?;
        positive("vehicle.wingspan_m", self.wingspan)?;
        positive("vehicle.wing_area_m2", self.wing_area)?;
        positive("vehicle.pitch_inertia_kgm2", self.pitch_inertia)?;
        positive("vehicle.yaw_inertia_kgm2", self.yaw_inertia)?;
        positive("vehicle.flap_thrust_coeff_ns2", self.flap_thrust_coeff)?;
        non_negative("vehicle.flap_osc_amplitude_n", self.flap_osc_amplitude)?;
        positive("vehicle.max_flap_freq_hz", self.max_flap_freq)?;
        if self.max_flap_freq > 10.0 {
            return Err(Error::config(
                "vehicle.max_flap_freq_hz",
                format!("must be <= 10 Hz, got {}", self.max_flap_freq),
            ));
        }
        if !(self.cruise_flap_freq > 0.0 && self.cruise_flap_freq <= self.max_flap_freq) {
            return Err(Error::config(
                "vehicle.cruise_flap_freq_hz",
                "must lie in (0, max_flap_freq_hz]",
            ));
        }
        positive("vehicle.elevator_effectiveness_nm_per_rad_per_mps2", self.elevator_effectiveness)?;
        positive("vehicle.rudder_effectiveness_nm_per_rad_per_mps2", self.rudder_effectiveness)?;
        non_negative("vehicle.pitch_stiffness_nm_per_rad_per_mps2", self.pitch_stiffness)?;
        non_negative("vehicle.yaw_stiffness_nm_per_rad_per_mps2", self.yaw_stiffness)?;
        non_negative("vehicle.pitch_damping_nms_per_rad", self.pitch_damping)?;
        non_negative("vehicle.yaw_damping_nms_per_rad", self.yaw_damping)?;
        non_negative("vehicle.parasitic_drag_coeff", self.parasitic_drag_coeff)?;
        positive("vehicle.leg_length_m", self.leg_length)?;
        let r = self.leg_angle_range;
        if !(r.min.is_finite() && r.max.is_finite() && r.min < r.max && r.contains(0.0)) {
            return Err(Error::config(
                "vehicle.leg_angle_range_deg",
                "must be a nonempty interval containing 0",
            ));
        }
        positive("vehicle.leg_max_rate_dps", self.leg_max_rate)?;
        positive("vehicle.claw_aperture_m", self.claw_aperture)?;
        positive("vehicle.claw_close_time_s", self.claw_close_time)?;
        positive("vehicle.claw_torque_nm", self.claw_torque)?;
        positive("vehicle.pad_friction_coeff", self.pad_friction_coeff)?;
        positive("vehicle.capture_depth_margin_m", self.capture_depth_margin)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    #[serde(rename = "gravity_mps2")]
    pub gravity: f64,
    #[serde(rename = "air_density_kgpm3")]
    pub air_density: f64,
    #[serde(rename = "wind_mps")]
    pub wind: Vector3<f64>,
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        positive("environment.gravity_mps2", self.gravity)?;
        positive("environment.air_density_kgpm3", self.air_density)?;
        if !self.wind.iter().all(|w| w.is_finite()) {
            return Err(Error::config("environment.wind_mps", "must be finite"));
        }
        Ok(())
    }
}

/// Straight horizontal branch. The approach side is the one `axis × up` points away from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    #[serde(rename = "center_m")]
    pub center: Vector3<f64>,
    #[serde(rename = "length_m")]
    pub length: f64,
    #[serde(rename = "radius_m")]
    pub radius: f64,
    pub axis: Vector3<f64>,
}

impl BranchSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::config("branch.center_m", "must be finite"));
        }
        positive("branch.length_m", self.length)?;
        positive("branch.radius_m", self.radius)?;
        if (self.axis.norm() - 1.0).abs() > 1e-9 || self.axis.z.abs() > 1e-9 {
            return Err(Error::config("branch.axis", "must be a horizontal unit vector"));
        }
        Ok(())
    }

    /// Horizontal unit normal of the branch plane, pointing in the approach direction.
    pub fn plane_normal(&self) -> Vector3<f64> {
        self.axis.cross(&Vector3::z())
    }

    /// Signed horizontal distance from `point` to the branch plane; positive before it.
    pub fn plane_distance(&self, point: &Vector3<f64>) -> f64 {
        (self.center - point).dot(&self.plane_normal())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchConfig {
    #[serde(rename = "rail_length_m")]
    pub rail_length: f64,
    #[serde(rename = "exit_speed_mps")]
    pub exit_speed: f64,
    #[serde(rename = "angle_of_attack_deg", with = "deg")]
    pub angle_of_attack: f64,
    #[serde(rename = "rail_height_m")]
    pub rail_height: f64,
    /// Perpendicular offset of the robot from the rail centreline (positive left).
    #[serde(rename = "lateral_offset_m")]
    pub lateral_offset: f64,
    #[serde(rename = "heading_deg", with = "deg")]
    pub heading: f64,
}

impl LaunchConfig {
    pub fn validate(&self) -> Result<()> {
        positive("launch.rail_length_m", self.rail_length)?;
        if !(self.exit_speed > 0.0 && self.exit_speed <= MAX_RAIL_EXIT_SPEED) {
            return Err(Error::config(
                "launch.exit_speed_mps",
                format!("must lie in (0, {MAX_RAIL_EXIT_SPEED}], got {}", self.exit_speed),
            ));
        }
        for (key, v) in [
            ("launch.angle_of_attack_deg", self.angle_of_attack),
            ("launch.rail_height_m", self.rail_height),
            ("launch.lateral_offset_m", self.lateral_offset),
            ("launch.heading_deg", self.heading),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    /// World frame: x downrange, y lateral (left), z up.
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub pitch: f64,
    pub pitch_rate: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    /// Realized flap frequency.
    pub flap_freq: f64,
    /// In [0, 2π).
    pub flap_phase: f64,
    pub leg_angle: f64,
    pub claw_closed: bool,
}

impl SimState {
    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.pitch.is_finite()
            && self.pitch_rate.is_finite()
            && self.yaw.is_finite()
            && self.yaw_rate.is_finite()
            && self.flap_freq.is_finite()
            && self.flap_phase.is_finite()
            && self.leg_angle.is_finite()
    }

    pub fn airspeed(&self, env: &Environment) -> f64 {
        (self.velocity - env.wind).norm()
    }

    /// Translational kinetic plus potential energy.
    pub fn mechanical_energy(&self, params: &VehicleParams, env: &Environment) -> f64 {
        0.5 * params.mass * self.velocity.norm_squared() + params.mass * env.gravity * self.position.z
    }

    fn advanced(&self, d: &StateDerivative, h: f64) -> SimState {
        SimState {
            time: self.time + h,
            position: self.position + d.position * h,
            velocity: self.velocity + d.velocity * h,
            pitch: self.pitch + d.pitch * h,
            pitch_rate: self.pitch_rate + d.pitch_rate * h,
            yaw: self.yaw + d.yaw * h,
            yaw_rate: self.yaw_rate + d.yaw_rate * h,
            flap_phase: self.flap_phase + d.flap_phase * h,
            ..self.clone()
        }
    }
}

/// Claw tip position for a body pose and leg angle.
pub fn claw_tip_position(
    position: &Vector3<f64>,
    pitch: f64,
    yaw: f64,
    leg_angle: f64,
    params: &VehicleParams,
) -> Vector3<f64> {
    let elevation = pitch - params.leg_mount_angle + leg_angle;
    let heading = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    position + params.leg_length * (elevation.cos() * heading + elevation.sin() * Vector3::z())
}

pub fn claw_tip(state: &SimState, params: &VehicleParams) -> Vector3<f64> {
    claw_tip_position(&state.position, state.pitch, state.yaw, state.leg_angle, params)
}

/// Time derivative of the continuous part of [`SimState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub pitch: f64,
    pub pitch_rate: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub flap_phase: f64,
}

impl StateDerivative {
    fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite())
            && [self.pitch, self.pitch_rate, self.yaw, self.yaw_rate, self.flap_phase]
                .iter()
                .all(|v| v.is_finite())
    }
}

/// Switches for test configurations of the force model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOptions {
    pub drag: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { drag: true }
    }
}

/// Flat-plate lift and drag coefficients.
pub fn aero_coefficients(alpha: f64, parasitic_drag_coeff: f64) -> (f64, f64) {
    let (s, c) = alpha.sin_cos();
    (2.0 * s * c, parasitic_drag_coeff + 2.0 * s * s)
}

/// Body-frame flapping force `[forward, lateral, up]`.
pub fn flapping_forces(flap_freq: f64, flap_phase: f64, params: &VehicleParams) -> Result<Vector3<f64>> {
    if !(0.0..=params.max_flap_freq).contains(&flap_freq) {
        return Err(Error::FlapFrequency {
            freq: flap_freq,
            max: params.max_flap_freq,
        });
    }
    if flap_freq == 0.0 {
        return Ok(Vector3::zeros());
    }
    let thrust = params.flap_thrust_coeff * flap_freq * flap_freq;
    let ratio = flap_freq / params.max_flap_freq;
    let vertical = params.flap_osc_amplitude * ratio * ratio * flap_phase.sin();
    Ok(Vector3::new(thrust, 0.0, vertical))
}

/// Body forward and body up axes in the world frame (no roll).
pub fn body_axes(pitch: f64, yaw: f64) -> (Vector3<f64>, Vector3<f64>) {
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    (
        Vector3::new(cp * cy, cp * sy, sp),
        Vector3::new(-sp * cy, -sp * sy, cp),
    )
}

/// Angle of attack of the airspeed vector in the body symmetry plane.
pub fn angle_of_attack(state: &SimState, env: &Environment) -> f64 {
    let air = state.velocity - env.wind;
    let (fwd, up) = body_axes(state.pitch, state.yaw);
    let (u, w) = (air.dot(&fwd), air.dot(&up));
    if u == 0.0 && w == 0.0 {
        0.0
    } else {
        (-w).atan2(u)
    }
}

/// World-frame aerodynamic force (lift + drag).
pub fn aero_force(state: &SimState, params: &VehicleParams, env: &Environment, opts: ModelOptions) -> Vector3<f64> {
    let air = state.velocity - env.wind;
    let speed = air.norm();
    if speed == 0.0 {
        return Vector3::zeros();
    }
    let (fwd, up) = body_axes(state.pitch, state.yaw);
    let (u, w) = (air.dot(&fwd), air.dot(&up));
    let alpha = if u == 0.0 && w == 0.0 { 0.0 } else { (-w).atan2(u) };
    let (cl, cd) = aero_coefficients(alpha, params.parasitic_drag_coeff);
    let dyn_force = 0.5 * env.air_density * params.wing_area * speed * speed;

    let in_plane = (u * u + w * w).sqrt();
    let lift = if in_plane > 0.0 {
        (up * u - fwd * w) * (dyn_force * cl / in_plane)
    } else {
        Vector3::zeros()
    };
    let drag = if opts.drag {
        -air * (dyn_force * cd / speed)
    } else {
        Vector3::zeros()
    };
    lift + drag
}

pub fn state_derivative(
    state: &SimState,
    cmd: &ControlCommand,
    params: &VehicleParams,
    env: &Environment,
) -> Result<StateDerivative> {
    state_derivative_with(state, cmd, params, env, ModelOptions::default())
}

pub fn state_derivative_with(
    state: &SimState,
    cmd: &ControlCommand,
    params: &VehicleParams,
    env: &Environment,
    opts: ModelOptions,
) -> Result<StateDerivative> {
    let (fwd, up) = body_axes(state.pitch, state.yaw);
    let flap_body = flapping_forces(state.flap_freq, state.flap_phase, params)?;
    let flap_world = fwd * flap_body.x + up * flap_body.z;
    let force = aero_force(state, params, env, opts) + flap_world;
    let accel = force / params.mass - Vector3::new(0.0, 0.0, env.gravity);

    let air = state.velocity - env.wind;
    let speed_sq = air.norm_squared();
    let alpha = angle_of_attack(state, env);
    let pitch_moment = params.elevator_effectiveness * speed_sq * cmd.elevator
        - params.pitch_stiffness * speed_sq * alpha
        - params.pitch_damping * state.pitch_rate;

    let horizontal = air.x.hypot(air.y);
    let sideslip = if horizontal > 0.0 {
        wrap_angle(air.y.atan2(air.x) - state.yaw)
    } else {
        0.0
    };
    let yaw_moment = params.rudder_effectiveness * speed_sq * cmd.rudder
        + params.yaw_stiffness * speed_sq * sideslip
        - params.yaw_damping * state.yaw_rate;

    let d = StateDerivative {
        position: state.velocity,
        velocity: accel,
        pitch: state.pitch_rate,
        pitch_rate: pitch_moment / params.pitch_inertia,
        yaw: state.yaw_rate,
        yaw_rate: yaw_moment / params.yaw_inertia,
        flap_phase: TAU * state.flap_freq,
    };
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite { time: state.time })
    }
}

fn normalize_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// One classical RK4 step. The realized flap frequency is set to the command
/// for the duration of the step; leg angle and claw state pass through.
pub fn step_rk4(
    state: &SimState,
    cmd: &ControlCommand,
    params: &VehicleParams,
    env: &Environment,
    dt: f64,
) -> Result<SimState> {
    step_rk4_with(state, cmd, params, env, dt, ModelOptions::default())
}

pub fn step_rk4_with(
    state: &SimState,
    cmd: &ControlCommand,
    params: &VehicleParams,
    env: &Environment,
    dt: f64,
    opts: ModelOptions,
) -> Result<SimState> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::config("sim.dt_s", format!("must lie in (0, {MAX_DT}], got {dt}")));
    }
    let mut s0 = state.clone();
    s0.flap_freq = cmd.flap_freq_cmd;

    let k1 = state_derivative_with(&s0, cmd, params, env, opts)?;
    let k2 = state_derivative_with(&s0.advanced(&k1, dt / 2.0), cmd, params, env, opts)?;
    let k3 = state_derivative_with(&s0.advanced(&k2, dt / 2.0), cmd, params, env, opts)?;
    let k4 = state_derivative_with(&s0.advanced(&k3, dt), cmd, params, env, opts)?;

    let w = dt / 6.0;
    let mut next = SimState {
        time: s0.time + dt,
        position: s0.position + (k1.position + 2.0 * k2.position + 2.0 * k3.position + k4.position) * w,
        velocity: s0.velocity + (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity) * w,
        pitch: s0.pitch + (k1.pitch + 2.0 * k2.pitch + 2.0 * k3.pitch + k4.pitch) * w,
        pitch_rate: s0.pitch_rate
            + (k1.pitch_rate + 2.0 * k2.pitch_rate + 2.0 * k3.pitch_rate + k4.pitch_rate) * w,
        yaw: s0.yaw + (k1.yaw + 2.0 * k2.yaw + 2.0 * k3.yaw + k4.yaw) * w,
        yaw_rate: s0.yaw_rate + (k1.yaw_rate + 2.0 * k2.yaw_rate + 2.0 * k3.yaw_rate + k4.yaw_rate) * w,
        flap_phase: s0.flap_phase
            + (k1.flap_phase + 2.0 * k2.flap_phase + 2.0 * k3.flap_phase + k4.flap_phase) * w,
        ..s0
    };
    next.flap_phase = normalize_phase(next.flap_phase);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite { time: next.time })
    }
}

/// State at the end of the launcher rail. The rail is horizontal, so the
/// release angle of attack is the pitch and the flight-path angle is zero.
pub fn launch_release(cfg: &LaunchConfig, params: &VehicleParams) -> Result<SimState> {
    cfg.validate()?;
    let along = Vector3::new(cfg.heading.cos(), cfg.heading.sin(), 0.0);
    let left = Vector3::new(-cfg.heading.sin(), cfg.heading.cos(), 0.0);
    Ok(SimState {
        time: 0.0,
        position: along * cfg.rail_length + left * cfg.lateral_offset + Vector3::z() * cfg.rail_height,
        velocity: along * cfg.exit_speed,
        pitch: cfg.angle_of_attack,
        pitch_rate: 0.0,
        yaw: cfg.heading,
        yaw_rate: 0.0,
        flap_freq: params.cruise_flap_freq,
        flap_phase: 0.0,
        leg_angle: 0.0,
        claw_closed: false,
    })
}
