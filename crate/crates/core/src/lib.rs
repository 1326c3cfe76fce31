//! Desk-scale simulator for autonomous branch perching of a large flapping-wing robot.
//!
//! A flight starts at the end of a launcher rail, is flown by a three-loop
//! pitch/yaw/altitude autopilot on simulated motion-capture feedback, switches on
//! a claw-mounted line detector near the branch to steer the leg, stops flapping
//! just before contact and ends in a bistable-claw grasp decision.
//!
//! Modules map onto the pieces of that chain:
//!
//! - [`vehicle`]: airframe data types, flat-plate aero, flapping forces, RK4 integration
//! - [`control`]: the three SISO loops and their composition
//! - [`perception`]: motion capture channel, line detector, rate-limited leg servo
//! - [`fsm`]: flight phases and every distance-based trigger
//! - [`grasp`]: capture, hold and impact checks at the branch plane
//! - [`campaign`]: scenario files, single flights, Monte Carlo campaigns, logs
//! - [`calibrate`]: trim and gain calibration that produces the nominal scenario
//! - [`cli`]: command-line front end

pub mod calibrate;
pub mod campaign;
pub mod cli;
pub mod control;
pub mod error;
pub mod fsm;
pub mod grasp;
pub mod perception;
pub mod units;
pub mod vehicle;

pub use error::{Error, Result};
