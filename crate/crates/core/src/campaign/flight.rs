//! One closed-loop flight from rail exit to a terminal phase.
//!
//! Within a physics step the fixed order is: sensors, controller, leg servo,
//! phase machine, physics. Contact with the branch plane is located between
//! physics steps by linear interpolation.

use serde::{Deserialize, Serialize};

use crate::control::{controller_update, ControlCommand, ControlState};
use crate::error::Result;
use crate::fsm::{branch_distance, detector_enabled, phase_transition, setpoints_for_phase, ContactVerdict, Phase};
use crate::grasp::{evaluate_grasp, ContactEvent, GraspResult};
use crate::perception::{
    leg_servo_update, line_detector, mocap_sample, LegServoModel, LineDetection, PoseHistory, SensorFrame,
};
use crate::vehicle::{claw_tip_position, launch_release, step_rk4, SimState};

use super::dispersion::apply_dispersions;
use super::rng::{substream, StreamTag};
use super::scenario::{steps_per_period, Scenario};

/// One CSV row per physics step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub time_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub vx_mps: f64,
    pub vy_mps: f64,
    pub vz_mps: f64,
    pub pitch_rad: f64,
    pub yaw_rad: f64,
    pub flap_freq_hz: f64,
    pub flap_phase_rad: f64,
    pub leg_angle_rad: f64,
    pub elevator_rad: f64,
    pub rudder_rad: f64,
    pub phase: Phase,
    pub detector_valid: bool,
    pub vertical_offset_m: f64,
    pub lateral_offset_m: f64,
}

impl LogRow {
    fn new(state: &SimState, cmd: &ControlCommand, phase: Phase, detection: &LineDetection) -> Self {
        let (vertical, lateral) = if detection.valid {
            (detection.vertical_offset, detection.lateral_offset)
        } else {
            (0.0, 0.0)
        };
        LogRow {
            time_s: state.time,
            x_m: state.position.x,
            y_m: state.position.y,
            z_m: state.position.z,
            vx_mps: state.velocity.x,
            vy_mps: state.velocity.y,
            vz_mps: state.velocity.z,
            pitch_rad: state.pitch,
            yaw_rad: state.yaw,
            flap_freq_hz: cmd.flap_freq_cmd,
            flap_phase_rad: state.flap_phase,
            leg_angle_rad: state.leg_angle,
            elevator_rad: cmd.elevator,
            rudder_rad: cmd.rudder,
            phase,
            detector_valid: detection.valid,
            vertical_offset_m: vertical,
            lateral_offset_m: lateral,
        }
    }

    pub fn speed(&self) -> f64 {
        (self.vx_mps * self.vx_mps + self.vy_mps * self.vy_mps + self.vz_mps * self.vz_mps).sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlightLog {
    pub rows: Vec<LogRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub phase: Phase,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_index: u64,
    pub terminal_phase: Phase,
    pub grasp: Option<GraspResult>,
    pub contact: Option<ContactEvent>,
    /// Body altitude minus branch height when the claw reaches the branch plane.
    #[serde(rename = "vertical_error_m")]
    pub vertical_error: Option<f64>,
    /// Body offset from the branch centre along the branch axis at the same instant.
    #[serde(rename = "lateral_error_m")]
    pub lateral_error: Option<f64>,
    #[serde(rename = "contact_speed_mps")]
    pub contact_speed: Option<f64>,
    #[serde(rename = "flight_time_s")]
    pub flight_time: f64,
    /// Downrange position where the body first reaches branch height.
    #[serde(rename = "distance_at_altitude_capture_m")]
    pub distance_at_altitude_capture: Option<f64>,
    pub dropouts: u32,
    pub transitions: Vec<PhaseChange>,
}

impl RunOutcome {
    pub fn perched(&self) -> bool {
        self.terminal_phase == Phase::Perched
    }

    pub fn vertical_miss(&self) -> Option<f64> {
        self.contact.as_ref().map(|c| c.vertical_miss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub record_log: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_log: true }
    }
}

pub fn run_flight(scenario: &Scenario, run_index: u64) -> Result<(RunOutcome, FlightLog)> {
    run_flight_with(scenario, run_index, RunOptions::default())
}

struct Contact {
    event: ContactEvent,
    grasp: GraspResult,
    vertical_error: f64,
    lateral_error: f64,
}

/// The scenario after this run's dispersion draws.
pub fn dispersed_scenario(scenario: &Scenario, run_index: u64) -> Result<Scenario> {
    let mut rng = substream(scenario.sim.master_seed, run_index, StreamTag::Dispersion);
    apply_dispersions(scenario, &mut rng)
}

pub fn run_flight_with(scenario: &Scenario, run_index: u64, opts: RunOptions) -> Result<(RunOutcome, FlightLog)> {
    let sc = dispersed_scenario(scenario, run_index)?;
    let vehicle = &sc.vehicle;
    let branch = &sc.branch;
    let dt = sc.sim.dt;
    // Rates were checked against dt by Scenario::validate.
    let ctrl_every = steps_per_period(sc.sim.controller_rate, dt).unwrap_or(1);
    let leg_every = steps_per_period(sc.leg_servo.update_rate, dt).unwrap_or(1);
    let mocap_every = steps_per_period(sc.mocap.rate, dt).unwrap_or(1);
    let ctrl_dt = ctrl_every as f64 * dt;
    let leg_dt = leg_every as f64 * dt;

    let mut mocap_rng = substream(sc.sim.master_seed, run_index, StreamTag::Mocap);
    let mut history = PoseHistory::new(sc.mocap.latency + 2.0 * dt);
    let servo = LegServoModel::new(sc.leg_servo.update_rate, vehicle);

    let mut state = launch_release(&sc.launch, vehicle)?;
    let mut phase = Phase::OnLauncher;
    let mut transitions = vec![PhaseChange {
        phase,
        time_s: state.time,
    }];
    let mut cs = ControlState::new(ControlCommand::neutral(vehicle.cruise_flap_freq));
    let mut cmd = cs.last_command.clone();
    let mut frame = SensorFrame::invalid(state.time);
    let mut nav_position = state.position;
    let mut verdict = ContactVerdict::Pending;
    let mut contact: Option<Contact> = None;
    let mut altitude_capture = None;
    let mut log = FlightLog::default();

    // Claw distance at the end of the last physics step. The leg servo can
    // move the tip between steps, so crossings are judged against this.
    let mut last_distance = branch_distance(&state, vehicle, branch);
    let mut step: u64 = 0;
    loop {
        history.record(&state);
        if step.is_multiple_of(mocap_every) {
            frame = mocap_sample(&state, &history, &sc.mocap, &mut mocap_rng);
            if frame.valid {
                nav_position = frame.position;
            }
        }

        let refs = setpoints_for_phase(phase, &nav_position, branch, &sc.guidance);
        if step.is_multiple_of(ctrl_every) {
            let (next_cmd, next_cs) = controller_update(&frame, &refs, &cs, &sc.gains, vehicle, ctrl_dt);
            cmd = ControlCommand {
                claw_trigger: cmd.claw_trigger,
                ..next_cmd
            };
            cs = next_cs;
        }

        let detection = if detector_enabled(phase) {
            line_detector(&state, branch, vehicle, &sc.detector)
        } else {
            LineDetection::none()
        };
        if sc.leg_servo.compensation && detector_enabled(phase) && step.is_multiple_of(leg_every) {
            state.leg_angle = leg_servo_update(state.leg_angle, &detection, &servo, leg_dt);
        }
        cmd.leg_angle_cmd = state.leg_angle;

        let next_phase = phase_transition(phase, &state, vehicle, branch, &sc.triggers, verdict);
        if next_phase != phase {
            phase = next_phase;
            transitions.push(PhaseChange {
                phase,
                time_s: state.time,
            });
        }
        if !setpoints_for_phase(phase, &nav_position, branch, &sc.guidance).flapping_enabled {
            cmd.flap_freq_cmd = 0.0;
        }

        if altitude_capture.is_none() && state.position.z >= branch.center.z {
            altitude_capture = Some(state.position.x);
        }
        if opts.record_log {
            log.rows.push(LogRow::new(&state, &cmd, phase, &detection));
        }
        if phase.is_terminal() {
            break;
        }

        let prev = state.clone();
        state = match step_rk4(&state, &cmd, vehicle, &sc.environment, dt) {
            Ok(next) => next,
            Err(_) => {
                phase = Phase::Crashed;
                transitions.push(PhaseChange {
                    phase,
                    time_s: prev.time + dt,
                });
                break;
            }
        };

        let after = branch_distance(&state, vehicle, branch);
        let before = std::mem::replace(&mut last_distance, after);
        if contact.is_none() {
            let plane = sc.triggers.contact_distance;
            if before > plane && after <= plane {
                let frac = (before - plane) / (before - after);
                let lerp = |a: f64, b: f64| a + (b - a) * frac;
                let position = prev.position + (state.position - prev.position) * frac;
                let velocity = prev.velocity + (state.velocity - prev.velocity) * frac;
                let tip = claw_tip_position(
                    &position,
                    lerp(prev.pitch, state.pitch),
                    lerp(prev.yaw, state.yaw),
                    state.leg_angle,
                    vehicle,
                );
                let event = ContactEvent {
                    time: lerp(prev.time, state.time),
                    claw_tip_position: tip,
                    relative_speed: velocity.norm(),
                    vertical_miss: tip.z - branch.center.z,
                    lateral_miss: (tip - branch.center).dot(&branch.axis),
                };
                let grasp = evaluate_grasp(&event, vehicle, branch, &sc.grasp, sc.environment.gravity)?;
                verdict = if grasp.perched() {
                    ContactVerdict::Perched
                } else {
                    ContactVerdict::Failed
                };
                state.claw_closed = grasp.captured;
                cmd.claw_trigger = true;
                contact = Some(Contact {
                    vertical_error: position.z - branch.center.z,
                    lateral_error: (position - branch.center).dot(&branch.axis),
                    event,
                    grasp,
                });
            }
        }
        step += 1;
    }

    let outcome = RunOutcome {
        run_index,
        terminal_phase: phase,
        grasp: contact.as_ref().map(|c| c.grasp.clone()),
        contact_speed: contact.as_ref().map(|c| c.event.relative_speed),
        vertical_error: contact.as_ref().map(|c| c.vertical_error),
        lateral_error: contact.as_ref().map(|c| c.lateral_error),
        contact: contact.map(|c| c.event),
        flight_time: state.time,
        distance_at_altitude_capture: altitude_capture,
        dropouts: cs.dropouts,
        transitions,
    };
    Ok((outcome, log))
}
