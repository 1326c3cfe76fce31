//! Motion-capture feedback, the claw-mounted line detector and the leg servo.

use std::collections::VecDeque;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::deg;
use crate::vehicle::{claw_tip, AngleRange, BranchSpec, SimState, VehicleParams};

#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub timestamp: f64,
    pub position: Vector3<f64>,
    pub pitch: f64,
    pub yaw: f64,
    pub pitch_rate: f64,
    pub yaw_rate: f64,
    /// Vertical velocity, m/s.
    pub climb_rate: f64,
    pub valid: bool,
}

impl SensorFrame {
    pub fn invalid(timestamp: f64) -> Self {
        SensorFrame {
            timestamp,
            position: Vector3::zeros(),
            pitch: 0.0,
            yaw: 0.0,
            pitch_rate: 0.0,
            yaw_rate: 0.0,
            climb_rate: 0.0,
            valid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MocapModel {
    #[serde(rename = "rate_hz")]
    pub rate: f64,
    #[serde(rename = "latency_s")]
    pub latency: f64,
    #[serde(rename = "position_noise_std_m")]
    pub position_noise_std: f64,
    /// Applied to angles (rad) and rates (rad/s) alike.
    #[serde(rename = "angle_noise_std_deg", with = "deg")]
    pub angle_noise_std: f64,
    #[serde(rename = "velocity_noise_std_mps")]
    pub velocity_noise_std: f64,
    pub dropout_prob: f64,
}

impl MocapModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::config("mocap.rate_hz", "must be > 0"));
        }
        for (key, v) in [
            ("mocap.latency_s", self.latency),
            ("mocap.position_noise_std_m", self.position_noise_std),
            ("mocap.angle_noise_std_deg", self.angle_noise_std),
            ("mocap.velocity_noise_std_mps", self.velocity_noise_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("must be >= 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::config("mocap.dropout_prob", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Pose {
    time: f64,
    position: Vector3<f64>,
    pitch: f64,
    yaw: f64,
    pitch_rate: f64,
    yaw_rate: f64,
    climb_rate: f64,
}

impl Pose {
    fn lerp(&self, other: &Pose, frac: f64) -> Pose {
        let mix = |a: f64, b: f64| a + (b - a) * frac;
        Pose {
            time: mix(self.time, other.time),
            position: self.position + (other.position - self.position) * frac,
            pitch: mix(self.pitch, other.pitch),
            yaw: mix(self.yaw, other.yaw),
            pitch_rate: mix(self.pitch_rate, other.pitch_rate),
            yaw_rate: mix(self.yaw_rate, other.yaw_rate),
            climb_rate: mix(self.climb_rate, other.climb_rate),
        }
    }
}

/// Caller-owned buffer of true poses used to apply the mocap latency.
#[derive(Debug, Clone)]
pub struct PoseHistory {
    poses: VecDeque<Pose>,
    horizon: f64,
}

impl PoseHistory {
    /// Keeps at least `horizon` seconds of history.
    pub fn new(horizon: f64) -> Self {
        PoseHistory {
            poses: VecDeque::new(),
            horizon,
        }
    }

    pub fn record(&mut self, state: &SimState) {
        self.poses.push_back(Pose {
            time: state.time,
            position: state.position,
            pitch: state.pitch,
            yaw: state.yaw,
            pitch_rate: state.pitch_rate,
            yaw_rate: state.yaw_rate,
            climb_rate: state.velocity.z,
        });
        let cutoff = state.time - self.horizon;
        while self.poses.len() > 2 && self.poses[1].time <= cutoff {
            self.poses.pop_front();
        }
    }

    fn pose_at(&self, t: f64) -> Option<Pose> {
        let first = self.poses.front()?;
        let last = self.poses.back()?;
        if t < first.time || t > last.time {
            return None;
        }
        if t == last.time {
            return Some(last.clone());
        }
        let idx = self.poses.partition_point(|p| p.time <= t);
        let (a, b) = (&self.poses[idx - 1], &self.poses[idx]);
        if t == a.time {
            return Some(a.clone());
        }
        Some(a.lerp(b, (t - a.time) / (b.time - a.time)))
    }
}

/// One motion-capture frame: the true pose `latency` seconds ago plus noise.
/// The random stream is advanced by the same amount whether or not the frame
/// drops out.
pub fn mocap_sample<R: Rng + ?Sized>(
    true_state: &SimState,
    history: &PoseHistory,
    model: &MocapModel,
    rng: &mut R,
) -> SensorFrame {
    let drop_draw: f64 = rng.random();
    let mut noise = [0.0f64; 8];
    for n in noise.iter_mut() {
        *n = rng.sample(StandardNormal);
    }
    let now = true_state.time;
    if drop_draw < model.dropout_prob {
        return SensorFrame::invalid(now);
    }
    let Some(pose) = history.pose_at(now - model.latency) else {
        return SensorFrame::invalid(now);
    };
    let ps = model.position_noise_std;
    let a = model.angle_noise_std;
    SensorFrame {
        timestamp: now,
        position: pose.position + Vector3::new(noise[0], noise[1], noise[2]) * ps,
        pitch: pose.pitch + noise[3] * a,
        yaw: pose.yaw + noise[4] * a,
        pitch_rate: pose.pitch_rate + noise[5] * a,
        yaw_rate: pose.yaw_rate + noise[6] * a,
        climb_rate: pose.climb_rate + noise[7] * model.velocity_noise_std,
        valid: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    #[serde(rename = "range_m")]
    pub range: f64,
    #[serde(rename = "fov_vertical_half_width_m")]
    pub fov_vertical_half_width: f64,
    #[serde(rename = "fov_lateral_half_width_m")]
    pub fov_lateral_half_width: f64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("detector.range_m", self.range),
            ("detector.fov_vertical_half_width_m", self.fov_vertical_half_width),
            ("detector.fov_lateral_half_width_m", self.fov_lateral_half_width),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineDetection {
    /// Branch above claw is positive.
    pub vertical_offset: f64,
    /// Branch centre minus claw tip along the branch axis.
    pub lateral_offset: f64,
    pub range: f64,
    pub valid: bool,
}

impl LineDetection {
    pub fn none() -> Self {
        LineDetection {
            vertical_offset: 0.0,
            lateral_offset: 0.0,
            range: f64::INFINITY,
            valid: false,
        }
    }
}

pub fn line_detector(
    true_state: &SimState,
    branch: &BranchSpec,
    params: &VehicleParams,
    model: &DetectorModel,
) -> LineDetection {
    let tip = claw_tip(true_state, params);
    let range = branch.plane_distance(&tip);
    let rel = branch.center - tip;
    let vertical_offset = rel.z;
    let lateral_offset = rel.dot(&branch.axis);
    let valid = (0.0..=model.range).contains(&range)
        && vertical_offset.abs() <= model.fov_vertical_half_width
        && lateral_offset.abs() <= model.fov_lateral_half_width;
    LineDetection {
        vertical_offset,
        lateral_offset,
        range,
        valid,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegServoModel {
    pub update_rate: f64,
    pub max_rate: f64,
    pub angle_range: AngleRange,
    pub leg_length: f64,
}

impl LegServoModel {
    pub fn new(update_rate: f64, params: &VehicleParams) -> Self {
        LegServoModel {
            update_rate,
            max_rate: params.leg_max_rate,
            angle_range: params.leg_angle_range,
            leg_length: params.leg_length,
        }
    }
}

/// New leg angle after one servo period of misalignment compensation.
pub fn leg_servo_update(current: f64, detection: &LineDetection, model: &LegServoModel, dt: f64) -> f64 {
    if !detection.valid {
        return current;
    }
    let target = model
        .angle_range
        .clamp(current + (detection.vertical_offset / model.leg_length).atan());
    let max_step = model.max_rate * dt;
    model.angle_range.clamp(current + (target - current).clamp(-max_step, max_step))
}
