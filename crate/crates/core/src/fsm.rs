//! Flight phases and the distance-based triggers between them.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::control::Setpoints;
use crate::error::{Error, Result};
use crate::units::deg;
use crate::vehicle::{claw_tip, BranchSpec, SimState, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    OnLauncher,
    ControlledFlight,
    BranchApproach,
    FlapCutoff,
    Perched,
    Missed,
    Crashed,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::OnLauncher,
        Phase::ControlledFlight,
        Phase::BranchApproach,
        Phase::FlapCutoff,
        Phase::Perched,
        Phase::Missed,
        Phase::Crashed,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Perched | Phase::Missed | Phase::Crashed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::OnLauncher => "on_launcher",
            Phase::ControlledFlight => "controlled_flight",
            Phase::BranchApproach => "branch_approach",
            Phase::FlapCutoff => "flap_cutoff",
            Phase::Perched => "perched",
            Phase::Missed => "missed",
            Phase::Crashed => "crashed",
        }
    }

    /// Whether `self -> next` is an edge of the phase graph.
    pub fn can_transition_to(self, next: Phase) -> bool {
        use Phase::*;
        if self.is_terminal() {
            return false;
        }
        matches!(
            (self, next),
            (OnLauncher, ControlledFlight)
                | (ControlledFlight, BranchApproach)
                | (BranchApproach, FlapCutoff)
                | (FlapCutoff, Perched)
                | (FlapCutoff, Missed)
                | (_, Crashed)
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerConfig {
    /// Detector and leg compensation switch on at or inside this distance.
    #[serde(rename = "approach_distance_m")]
    pub approach_distance: f64,
    /// Flapping stops at or inside this distance.
    #[serde(rename = "cutoff_distance_m")]
    pub cutoff_distance: f64,
    /// Distance at which the claw meets the branch plane.
    #[serde(rename = "contact_distance_m")]
    pub contact_distance: f64,
    /// Travel past the contact plane after which a flight without capture is a miss.
    #[serde(rename = "fly_by_distance_m")]
    pub fly_by_distance: f64,
    #[serde(rename = "ground_altitude_m")]
    pub ground_altitude: f64,
    #[serde(rename = "timeout_s")]
    pub timeout: f64,
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("triggers.approach_distance_m", self.approach_distance),
            ("triggers.cutoff_distance_m", self.cutoff_distance),
            ("triggers.fly_by_distance_m", self.fly_by_distance),
            ("triggers.timeout_s", self.timeout),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }
        if !(self.contact_distance.is_finite() && self.contact_distance >= 0.0) {
            return Err(Error::config("triggers.contact_distance_m", "must be >= 0"));
        }
        if self.cutoff_distance >= self.approach_distance {
            return Err(Error::config(
                "triggers.cutoff_distance_m",
                "must be smaller than approach_distance_m",
            ));
        }
        if self.contact_distance >= self.cutoff_distance {
            return Err(Error::config(
                "triggers.contact_distance_m",
                "must be smaller than cutoff_distance_m",
            ));
        }
        if !self.ground_altitude.is_finite() {
            return Err(Error::config("triggers.ground_altitude_m", "must be finite"));
        }
        Ok(())
    }
}

/// Reference-generation settings shared by the flight phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guidance {
    #[serde(rename = "pitch_ref_deg", with = "deg")]
    pub pitch_ref: f64,
    /// Floor on the downrange distance used to aim the yaw reference, so the
    /// heading command stays bounded close to the branch.
    #[serde(rename = "yaw_lookahead_floor_m")]
    pub yaw_lookahead_floor: f64,
}

impl Guidance {
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch_ref.is_finite() && self.pitch_ref > 0.0 && self.pitch_ref < 40f64.to_radians()) {
            return Err(Error::config("guidance.pitch_ref_deg", "must lie in (0, 40) degrees"));
        }
        if !(self.yaw_lookahead_floor.is_finite() && self.yaw_lookahead_floor > 0.0) {
            return Err(Error::config("guidance.yaw_lookahead_floor_m", "must be > 0"));
        }
        Ok(())
    }
}

/// Grasp decision fed back into the phase machine once the claw reaches the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactVerdict {
    Pending,
    Perched,
    Failed,
}

/// Claw-tip distance to the branch plane; positive on the approach side.
pub fn branch_distance(state: &SimState, params: &VehicleParams, branch: &BranchSpec) -> f64 {
    branch.plane_distance(&claw_tip(state, params))
}

pub fn phase_transition(
    phase: Phase,
    state: &SimState,
    params: &VehicleParams,
    branch: &BranchSpec,
    trig: &TriggerConfig,
    verdict: ContactVerdict,
) -> Phase {
    if phase.is_terminal() {
        return phase;
    }
    if !state.is_finite() || state.position.z <= trig.ground_altitude || state.time > trig.timeout {
        return Phase::Crashed;
    }
    let distance = branch_distance(state, params, branch);
    match phase {
        Phase::OnLauncher => Phase::ControlledFlight,
        Phase::ControlledFlight if distance <= trig.approach_distance => Phase::BranchApproach,
        Phase::BranchApproach if distance <= trig.cutoff_distance => Phase::FlapCutoff,
        Phase::FlapCutoff => match verdict {
            ContactVerdict::Perched => Phase::Perched,
            _ if distance < trig.contact_distance - trig.fly_by_distance => Phase::Missed,
            _ => Phase::FlapCutoff,
        },
        other => other,
    }
}

/// References for the autopilot. `position` is the best available position
/// estimate and only steers the yaw reference.
pub fn setpoints_for_phase(phase: Phase, position: &Vector3<f64>, branch: &BranchSpec, guidance: &Guidance) -> Setpoints {
    let to_branch = branch.center - position;
    let normal = branch.plane_normal();
    let downrange = to_branch.dot(&normal).max(guidance.yaw_lookahead_floor);
    let lateral = to_branch - normal * to_branch.dot(&normal);
    let aim = normal * downrange + Vector3::new(lateral.x, lateral.y, 0.0);
    let tracking = Setpoints {
        pitch_ref: guidance.pitch_ref,
        yaw_ref: aim.y.atan2(aim.x),
        alt_ref: branch.center.z,
        flapping_enabled: true,
        hold_surfaces: false,
    };
    match phase {
        Phase::OnLauncher | Phase::ControlledFlight | Phase::BranchApproach => tracking,
        Phase::FlapCutoff => Setpoints {
            flapping_enabled: false,
            hold_surfaces: true,
            ..tracking
        },
        Phase::Perched | Phase::Missed | Phase::Crashed => Setpoints::neutral(),
    }
}

pub fn detector_enabled(phase: Phase) -> bool {
    matches!(phase, Phase::BranchApproach | Phase::FlapCutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::tests::{rest_state, test_params};

    fn branch() -> BranchSpec {
        BranchSpec {
            center: Vector3::new(14.0, 0.5, 2.0),
            length: 0.8,
            radius: 0.025,
            axis: Vector3::y(),
        }
    }

    fn triggers() -> TriggerConfig {
        TriggerConfig {
            approach_distance: 1.5,
            cutoff_distance: 0.2,
            contact_distance: 0.0,
            fly_by_distance: 0.5,
            ground_altitude: 0.0,
            timeout: 15.0,
        }
    }

    fn guidance() -> Guidance {
        Guidance {
            pitch_ref: 30f64.to_radians(),
            yaw_lookahead_floor: 2.0,
        }
    }

    fn at_distance(d: f64) -> SimState {
        let p = test_params();
        SimState {
            time: 2.0,
            position: Vector3::new(14.0 - d - p.leg_length, 0.5, 2.0),
            pitch: p.leg_mount_angle,
            ..rest_state()
        }
    }

    fn step(phase: Phase, d: f64) -> Phase {
        phase_transition(phase, &at_distance(d), &test_params(), &branch(), &triggers(), ContactVerdict::Pending)
    }

    #[test]
    fn trigger_boundaries() {
        assert_eq!(step(Phase::ControlledFlight, 1.51), Phase::ControlledFlight);
        assert_eq!(step(Phase::ControlledFlight, 1.5), Phase::BranchApproach);
        assert_eq!(step(Phase::BranchApproach, 0.21), Phase::BranchApproach);
        assert_eq!(step(Phase::BranchApproach, 0.19), Phase::FlapCutoff);
        assert_eq!(step(Phase::OnLauncher, 12.0), Phase::ControlledFlight);
    }

    #[test]
    fn one_step_per_evaluation() {
        // Even deep inside the cutoff radius, flight goes through approach first.
        assert_eq!(step(Phase::ControlledFlight, 0.1), Phase::BranchApproach);
    }

    #[test]
    fn ground_contact_crashes_any_live_phase() {
        for phase in [Phase::OnLauncher, Phase::ControlledFlight, Phase::BranchApproach, Phase::FlapCutoff] {
            let mut s = at_distance(5.0);
            s.position.z = 0.0;
            let next = phase_transition(phase, &s, &test_params(), &branch(), &triggers(), ContactVerdict::Pending);
            assert_eq!(next, Phase::Crashed);
        }
    }

    #[test]
    fn timeout_and_non_finite_crash() {
        let mut s = at_distance(5.0);
        s.time = 15.01;
        let p = test_params();
        assert_eq!(
            phase_transition(Phase::ControlledFlight, &s, &p, &branch(), &triggers(), ContactVerdict::Pending),
            Phase::Crashed
        );
        let mut s = at_distance(5.0);
        s.velocity.x = f64::NAN;
        assert_eq!(
            phase_transition(Phase::ControlledFlight, &s, &p, &branch(), &triggers(), ContactVerdict::Pending),
            Phase::Crashed
        );
    }

    #[test]
    fn cutoff_resolution() {
        let p = test_params();
        let s = at_distance(-0.01);
        assert_eq!(
            phase_transition(Phase::FlapCutoff, &s, &p, &branch(), &triggers(), ContactVerdict::Perched),
            Phase::Perched
        );
        assert_eq!(
            phase_transition(Phase::FlapCutoff, &s, &p, &branch(), &triggers(), ContactVerdict::Failed),
            Phase::FlapCutoff
        );
        let s = at_distance(-0.51);
        assert_eq!(
            phase_transition(Phase::FlapCutoff, &s, &p, &branch(), &triggers(), ContactVerdict::Failed),
            Phase::Missed
        );
    }

    #[test]
    fn terminal_phases_never_exit() {
        for phase in [Phase::Perched, Phase::Missed, Phase::Crashed] {
            let mut s = at_distance(-3.0);
            s.position.z = -1.0;
            assert_eq!(
                phase_transition(phase, &s, &test_params(), &branch(), &triggers(), ContactVerdict::Perched),
                phase
            );
        }
    }

    #[test]
    fn transition_graph() {
        use Phase::*;
        assert!(OnLauncher.can_transition_to(ControlledFlight));
        assert!(FlapCutoff.can_transition_to(Missed));
        assert!(BranchApproach.can_transition_to(Crashed));
        assert!(!ControlledFlight.can_transition_to(FlapCutoff));
        assert!(!Perched.can_transition_to(Crashed));
        assert!(!BranchApproach.can_transition_to(ControlledFlight));
    }

    #[test]
    fn setpoints_per_phase() {
        let g = guidance();
        let b = branch();
        let sp = setpoints_for_phase(Phase::ControlledFlight, &Vector3::new(4.0, 0.5, 1.5), &b, &g);
        assert!((sp.pitch_ref - 30f64.to_radians()).abs() < 1e-15);
        assert_eq!(sp.alt_ref, 2.0);
        assert!(sp.yaw_ref.abs() < 1e-15);
        assert!(sp.flapping_enabled);

        // Branch 1 m to the left at 10 m downrange.
        let sp = setpoints_for_phase(Phase::BranchApproach, &Vector3::new(4.0, -0.5, 1.5), &b, &g);
        assert!((sp.yaw_ref - (1.0f64).atan2(10.0)).abs() < 1e-12);

        // Lookahead floor bounds the heading command near the plane.
        let sp = setpoints_for_phase(Phase::BranchApproach, &Vector3::new(13.9, 0.4, 2.0), &b, &g);
        assert!((sp.yaw_ref - (0.1f64).atan2(2.0)).abs() < 1e-12);

        let sp = setpoints_for_phase(Phase::FlapCutoff, &Vector3::new(13.8, 0.5, 2.0), &b, &g);
        assert!(!sp.flapping_enabled && sp.hold_surfaces);

        assert_eq!(setpoints_for_phase(Phase::Perched, &Vector3::zeros(), &b, &g), Setpoints::neutral());
    }

    #[test]
    fn detector_window() {
        assert!(!detector_enabled(Phase::ControlledFlight));
        assert!(detector_enabled(Phase::BranchApproach));
        assert!(detector_enabled(Phase::FlapCutoff));
        assert!(!detector_enabled(Phase::Perched));
        assert!(!detector_enabled(Phase::OnLauncher));
    }

    #[test]
    fn trigger_validation() {
        let bad = TriggerConfig { cutoff_distance: 2.0, ..triggers() };
        assert!(matches!(bad.validate(), Err(Error::Config { ref key, .. }) if key == "triggers.cutoff_distance_m"));
        assert!(triggers().validate().is_ok());
    }
}
