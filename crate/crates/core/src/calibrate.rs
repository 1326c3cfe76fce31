//! Calibration that turns the base scenario into the nominal one.
//!
//! 1. Trim: with the body at the pitch reference in level flight the angle of
//!    attack equals the pitch, so lift, drag and thrust balance in closed form.
//!    Given a target trim airspeed and the cruise flap frequency this fixes the
//!    effective wing area and the flap thrust coefficient.
//! 2. Pitch gains: grid search over (kp, ki, kd) minimizing the time after
//!    which pitch stays within the settling band of the reference, rejecting
//!    any candidate whose pitch ever exceeds the ceiling.
//! 3. Altitude gains: grid search over (kp, ki, climb-rate kd) minimizing the distance between
//!    the downrange position of first altitude capture and the target, subject
//!    to a bounded altitude overshoot and a settled pitch.
//!
//! Every candidate is scored on run 0 of the scenario without dispersions, so
//! the result is deterministic.

use serde::Serialize;

use crate::campaign::flight::{run_flight, FlightLog, RunOutcome};
use crate::campaign::scenario::Scenario;
use crate::error::{Error, Result};
use crate::fsm::Phase;
use crate::vehicle::{aero_coefficients, Environment, VehicleParams};

/// Midpoint of the 2.5-3.0 m/s perching speed band.
pub const TARGET_TRIM_SPEED: f64 = 2.75;
/// Midpoint of the 8-12 m altitude capture window.
pub const TARGET_CAPTURE_DISTANCE: f64 = 10.0;
pub const PITCH_CEILING_DEG: f64 = 40.0;
pub const SETTLE_BAND_DEG: f64 = 2.0;
pub const MAX_ALTITUDE_OVERSHOOT: f64 = 0.1;

const PITCH_KP: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
const PITCH_KI: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
const PITCH_KD: [f64; 4] = [0.05, 0.1, 0.2, 0.3];
const ALT_KP: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
const ALT_KI: [f64; 3] = [0.0, 0.1, 0.2];
const ALT_KD: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trim {
    pub wing_area: f64,
    pub flap_thrust_coeff: f64,
    pub thrust: f64,
}

/// Closed-form level trim at `pitch` and `speed` with mean flapping thrust
/// along the body axis at the cruise frequency.
pub fn solve_trim(params: &VehicleParams, env: &Environment, pitch: f64, speed: f64) -> Result<Trim> {
    let (cl, cd) = aero_coefficients(pitch, params.parasitic_drag_coeff);
    let dynamic_pressure = 0.5 * env.air_density * speed * speed;
    let lift_share = cl + cd * pitch.tan();
    if !(lift_share > 0.0 && dynamic_pressure > 0.0) {
        return Err(Error::config("guidance.pitch_ref_deg", "no level trim at this pitch"));
    }
    let wing_area = params.mass * env.gravity / (dynamic_pressure * lift_share);
    let thrust = dynamic_pressure * wing_area * cd / pitch.cos();
    let flap_thrust_coeff = thrust / (params.cruise_flap_freq * params.cruise_flap_freq);
    Ok(Trim {
        wing_area,
        flap_thrust_coeff,
        thrust,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlightMetrics {
    /// Time after which pitch stays in the band until flap cutoff.
    pub settle_time: Option<f64>,
    pub max_pitch: f64,
    pub capture_distance: Option<f64>,
    /// Highest altitude above the reference after first capture.
    pub altitude_overshoot: f64,
    /// Mean airspeed over the last second before flap cutoff.
    pub steady_speed: Option<f64>,
    pub terminal_phase: Phase,
}

fn powered(phase: Phase) -> bool {
    matches!(phase, Phase::ControlledFlight | Phase::BranchApproach)
}

pub fn flight_metrics(scenario: &Scenario, outcome: &RunOutcome, log: &FlightLog) -> FlightMetrics {
    let pitch_ref = scenario.guidance.pitch_ref;
    let band = SETTLE_BAND_DEG.to_radians();
    let alt_ref = scenario.branch.center.z;
    let rows: Vec<_> = log.rows.iter().filter(|r| powered(r.phase)).collect();

    let max_pitch = log.rows.iter().map(|r| r.pitch_rad).fold(f64::NEG_INFINITY, f64::max);
    let settle_time = match rows.iter().rposition(|r| (r.pitch_rad - pitch_ref).abs() > band) {
        None => rows.first().map(|r| r.time_s),
        Some(i) if i + 1 < rows.len() => Some(rows[i + 1].time_s),
        Some(_) => None,
    };

    let altitude_overshoot = match log.rows.iter().position(|r| r.z_m >= alt_ref) {
        Some(i) => log.rows[i..].iter().map(|r| r.z_m - alt_ref).fold(0.0, f64::max),
        None => 0.0,
    };

    let steady_speed = rows.last().and_then(|last| {
        let window: Vec<f64> = rows
            .iter()
            .filter(|r| r.time_s > last.time_s - 1.0)
            .map(|r| r.speed())
            .collect();
        (!window.is_empty()).then(|| window.iter().sum::<f64>() / window.len() as f64)
    });

    FlightMetrics {
        settle_time,
        max_pitch,
        capture_distance: outcome.distance_at_altitude_capture,
        altitude_overshoot,
        steady_speed,
        terminal_phase: outcome.terminal_phase,
    }
}

fn evaluate(scenario: &Scenario) -> Result<FlightMetrics> {
    let (outcome, log) = run_flight(scenario, 0)?;
    Ok(flight_metrics(scenario, &outcome, &log))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub trim_speed_mps: f64,
    pub trim: Trim,
    pub pitch_gains: [f64; 3],
    pub alt_gains: [f64; 3],
    pub metrics: FlightMetrics,
    pub candidates_evaluated: usize,
}

pub fn calibrate(base: &Scenario) -> Result<(Scenario, CalibrationReport)> {
    let mut out = base.clone();
    let trim = solve_trim(&base.vehicle, &base.environment, base.guidance.pitch_ref, TARGET_TRIM_SPEED)?;
    out.vehicle.wing_area = trim.wing_area;
    out.vehicle.flap_thrust_coeff = trim.flap_thrust_coeff;

    let mut probe = out.without_dispersions();
    let mut evaluated = 0;
    let ceiling = PITCH_CEILING_DEG.to_radians();

    let mut best: Option<(f64, [f64; 3])> = None;
    for kp in PITCH_KP {
        for ki in PITCH_KI {
            for kd in PITCH_KD {
                probe.gains.pitch_kp = kp;
                probe.gains.pitch_ki = ki;
                probe.gains.pitch_rate_kd = kd;
                let m = evaluate(&probe)?;
                evaluated += 1;
                let Some(settle) = m.settle_time else { continue };
                if m.max_pitch >= ceiling || m.terminal_phase == Phase::Crashed {
                    continue;
                }
                if best.is_none_or(|(t, _)| settle < t) {
                    best = Some((settle, [kp, ki, kd]));
                }
            }
        }
    }
    let (_, pitch_gains) =
        best.ok_or_else(|| Error::config("gains.pitch_kp", "no pitch gain candidate settles below the ceiling"))?;
    [probe.gains.pitch_kp, probe.gains.pitch_ki, probe.gains.pitch_rate_kd] = pitch_gains;

    let mut best: Option<(f64, [f64; 3])> = None;
    for kp in ALT_KP {
        for ki in ALT_KI {
            for kd in ALT_KD {
                probe.gains.alt_kp = kp;
                probe.gains.alt_ki = ki;
                probe.gains.alt_rate_kd = kd;
                let m = evaluate(&probe)?;
                evaluated += 1;
                let (Some(capture), Some(_)) = (m.capture_distance, m.settle_time) else {
                    continue;
                };
                if m.altitude_overshoot > MAX_ALTITUDE_OVERSHOOT || m.max_pitch >= ceiling {
                    continue;
                }
                let score = (capture - TARGET_CAPTURE_DISTANCE).abs();
                if best.is_none_or(|(s, _)| score < s) {
                    best = Some((score, [kp, ki, kd]));
                }
            }
        }
    }
    let (_, alt_gains) =
        best.ok_or_else(|| Error::config("gains.alt_kp", "no altitude gain candidate captures the reference"))?;
    [probe.gains.alt_kp, probe.gains.alt_ki, probe.gains.alt_rate_kd] = alt_gains;

    out.gains = probe.gains.clone();
    let metrics = evaluate(&probe)?;
    Ok((
        out,
        CalibrationReport {
            trim_speed_mps: TARGET_TRIM_SPEED,
            trim,
            pitch_gains,
            alt_gains,
            metrics,
            candidates_evaluated: evaluated,
        },
    ))
}

/// Comment block written at the top of a calibrated scenario file.
pub fn calibrated_header(report: &CalibrationReport) -> String {
    format!(
        "Generated by `perchsim calibrate`.\n\
         \n\
         Calibrated: vehicle.wing_area_m2 and vehicle.flap_thrust_coeff_ns2\n\
         (level trim at the pitch reference and {:.2} m/s), gains.pitch_* and\n\
         gains.alt_* (grid search, {} candidates).\n\
         Assumed, with no measured value: inertias, effectiveness, damping,\n\
         friction, claw/leg geometry, sensor models and dispersions.",
        report.trim_speed_mps, report.candidates_evaluated
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::scenario::base;

    #[test]
    fn trim_balances_forces() {
        let s = base();
        let pitch = s.guidance.pitch_ref;
        let trim = solve_trim(&s.vehicle, &s.environment, pitch, 2.75).unwrap();
        // Independent check: residual force of the force balance written out
        // component by component.
        let q = 0.5 * s.environment.air_density * 2.75 * 2.75 * trim.wing_area;
        let cl = (2.0 * pitch).sin();
        let cd = s.vehicle.parasitic_drag_coeff + 2.0 * pitch.sin().powi(2);
        let fx = trim.thrust * pitch.cos() - q * cd;
        let fz = q * cl + trim.thrust * pitch.sin() - s.vehicle.mass * s.environment.gravity;
        assert!(fx.abs() < 1e-12 && fz.abs() < 1e-12, "{fx} {fz}");
        assert!((trim.flap_thrust_coeff * s.vehicle.cruise_flap_freq.powi(2) - trim.thrust).abs() < 1e-12);
    }
}
