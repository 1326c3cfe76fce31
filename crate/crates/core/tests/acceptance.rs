//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each and exits nonzero if any fails.

use std::time::{Duration, Instant};

use nalgebra::Vector3;
use perchsim::calibrate::flight_metrics;
use perchsim::campaign::flight::{run_flight_with, RunOptions};
use perchsim::campaign::scenario::nominal;
use perchsim::campaign::{run_campaign, run_campaign_with_workers, run_flight, RunOutcome, Scenario, Summary};
use perchsim::control::ControlCommand;
use perchsim::fsm::Phase;
use perchsim::grasp::{hold_check, impact_force, ContactEvent};
use perchsim::vehicle::{claw_tip_position, step_rk4, step_rk4_with, Environment, ModelOptions, SimState};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn speed_pitch_envelope() -> Verdict {
    let sc = nominal().without_dispersions();
    let ((outcome, log), elapsed) = timed(|| run_flight(&sc, 0).expect("nominal flight runs"));
    let m = flight_metrics(&sc, &outcome, &log);
    let speed = m.steady_speed.unwrap_or(f64::NAN);
    let pass = m.settle_time.is_some() && (2.5..=3.0).contains(&speed) && elapsed < Duration::from_secs(5);
    verdict(
        pass,
        format!(
            "pitch settles to 30±2 deg at {:?} s, steady airspeed {speed:.3} m/s, runtime {elapsed:.2?}",
            m.settle_time
        ),
    )
}

fn altitude_capture() -> Verdict {
    let sc = nominal().without_dispersions();
    let (outcome, _) = run_flight(&sc, 0).expect("nominal flight runs");
    let x = outcome.distance_at_altitude_capture;
    verdict(
        x.is_some_and(|x| (8.0..=12.0).contains(&x)),
        format!("first reaches 2.0 m at x = {x:?} m"),
    )
}

fn accuracy_envelope(stats: &perchsim::campaign::CampaignStats, elapsed: Duration) -> Verdict {
    let v = stats.mean_abs_vertical_error.unwrap_or(f64::INFINITY);
    let l = stats.p90_lateral_error.unwrap_or(f64::INFINITY);
    verdict(
        v <= 0.16 && l <= 0.60 && elapsed < Duration::from_secs(60),
        format!("mean |vertical| {v:.4} m, p90 |lateral| {l:.4} m, 500 runs in {elapsed:.2?}"),
    )
}

fn success_rate(stats: &perchsim::campaign::CampaignStats, outcomes: &[RunOutcome]) -> Verdict {
    let worst = outcomes
        .iter()
        .filter(|o| o.perched())
        .filter_map(|o| o.grasp.as_ref().map(|g| g.impact_force))
        .fold(0.0, f64::max);
    let all_below = outcomes
        .iter()
        .filter(|o| o.perched())
        .all(|o| o.grasp.as_ref().is_some_and(|g| g.impact_force < 150.0));
    verdict(
        stats.success_rate >= 0.6 && all_below,
        format!(
            "success_rate {:.3}, max perched impact {worst:.1} N",
            stats.success_rate
        ),
    )
}

fn trigger_correctness(sc: &Scenario, runs: u64) -> Verdict {
    let approach = sc.triggers.approach_distance;
    let cutoff = sc.triggers.cutoff_distance;
    for run in 0..runs {
        let (outcome, log) = run_flight_with(sc, run, RunOptions { record_log: true }).expect("flight runs");
        let disp = perchsim::campaign::flight::dispersed_scenario(sc, run).expect("dispersion applies");
        let mut prev_phase = Phase::OnLauncher;
        let mut seen_approach = false;
        let mut seen_cutoff = false;
        for row in &log.rows {
            if row.phase != prev_phase && !prev_phase.can_transition_to(row.phase) {
                return verdict(false, format!("run {run}: illegal {prev_phase} -> {}", row.phase));
            }
            let tip = claw_tip_position(
                &Vector3::new(row.x_m, row.y_m, row.z_m),
                row.pitch_rad,
                row.yaw_rad,
                row.leg_angle_rad,
                &disp.vehicle,
            );
            let d = disp.branch.plane_distance(&tip);
            let crashed = row.phase == Phase::Crashed;
            if !seen_approach && d <= approach && !crashed {
                if row.phase != Phase::BranchApproach {
                    return verdict(false, format!("run {run}: at d = {d:.4} m phase is {}", row.phase));
                }
                seen_approach = true;
            } else if !seen_approach && row.phase == Phase::BranchApproach {
                return verdict(false, format!("run {run}: approach early at d = {d:.4} m"));
            }
            if !seen_cutoff && d <= cutoff && !crashed {
                if row.phase != Phase::FlapCutoff {
                    return verdict(false, format!("run {run}: at d = {d:.4} m phase is {}", row.phase));
                }
                seen_cutoff = true;
            } else if !seen_cutoff && row.phase == Phase::FlapCutoff {
                return verdict(false, format!("run {run}: cutoff early at d = {d:.4} m"));
            }
            prev_phase = row.phase;
        }
        let phases: Vec<Phase> = outcome.transitions.iter().map(|t| t.phase).collect();
        if phases.windows(2).any(|w| !w[0].can_transition_to(w[1])) || !outcome.terminal_phase.is_terminal() {
            return verdict(false, format!("run {run}: illegal sequence {phases:?}"));
        }
    }
    verdict(true, format!("{runs} logged runs: triggers at first sample within 1.5 m / 0.2 m, legal sequences"))
}

fn oracle_equivalences() -> Verdict {
    let sc = nominal();
    let p = &sc.vehicle;
    let g = sc.environment.gravity;

    // Bisection on the hold predicate against tau / (m g).
    let closed = p.claw_torque / (p.mass * g);
    let (mut lo, mut hi) = (0.0, 10.0 * closed);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hold_check(mid, p, g).0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let hold_err = (lo - closed).abs();

    let mut impact_err: f64 = 0.0;
    for v in [0.5, 1.0, 2.43, 2.75, 3.5] {
        let ev = ContactEvent {
            time: 0.0,
            claw_tip_position: Vector3::zeros(),
            relative_speed: v,
            vertical_miss: 0.0,
            lateral_miss: 0.0,
        };
        let f = impact_force(&ev, p, sc.grasp.stop_distance).expect("positive stop distance");
        impact_err = impact_err.max((f - 0.7 * v * v / (2.0 * sc.grasp.stop_distance)).abs());
    }

    let vacuum = Environment {
        air_density: 0.0,
        ..sc.environment.clone()
    };
    let s0 = SimState {
        time: 0.0,
        position: Vector3::new(0.0, 0.0, 10.0),
        velocity: Vector3::new(3.0, -0.5, 2.0),
        pitch: 0.3,
        pitch_rate: 0.0,
        yaw: 0.0,
        yaw_rate: 0.0,
        flap_freq: 0.0,
        flap_phase: 0.0,
        leg_angle: 0.0,
        claw_closed: false,
    };
    let idle = ControlCommand::neutral(0.0);
    let mut s = s0.clone();
    for _ in 0..20 {
        s = step_rk4(&s, &idle, p, &vacuum, 0.005).expect("finite");
    }
    let t = s.time;
    let analytic_p = s0.position + s0.velocity * t - Vector3::new(0.0, 0.0, 0.5 * g * t * t);
    let analytic_v = s0.velocity - Vector3::new(0.0, 0.0, g * t);
    let rk4_err = (s.position - analytic_p).norm().max((s.velocity - analytic_v).norm());

    verdict(
        hold_err <= 1e-12 && impact_err <= 1e-12 && rk4_err <= 1e-9,
        format!("hold threshold err {hold_err:.1e}, impact err {impact_err:.1e}, ballistic RK4 err {rk4_err:.1e}"),
    )
}

fn numerical_soundness() -> Verdict {
    let sc = nominal().without_dispersions();
    let p = &sc.vehicle;
    let env = &sc.environment;
    let mut s = SimState {
        time: 0.0,
        position: Vector3::new(0.0, 0.0, 5.0),
        velocity: Vector3::new(2.75, 0.0, 0.0),
        pitch: sc.guidance.pitch_ref,
        pitch_rate: 0.0,
        yaw: 0.0,
        yaw_rate: 0.0,
        flap_freq: 0.0,
        flap_phase: 0.0,
        leg_angle: 0.0,
        claw_closed: false,
    };
    let idle = ControlCommand::neutral(0.0);
    let no_drag = ModelOptions { drag: false };
    let e0 = s.mechanical_energy(p, env);
    let seconds = 2.0;
    let steps = (seconds / sc.sim.dt).round() as usize;
    for _ in 0..steps {
        s = step_rk4_with(&s, &idle, p, env, sc.sim.dt, no_drag).expect("finite");
    }
    let drift = ((s.mechanical_energy(p, env) - e0) / e0).abs() / seconds;

    let end = |sc: &Scenario| {
        let (_, log) = run_flight(sc, 0).expect("flight runs");
        let r = log.rows.last().expect("non-empty log").clone();
        Vector3::new(r.x_m, r.y_m, r.z_m)
    };
    let coarse = end(&sc);
    let fine = end(&sc.with_dt(sc.sim.dt / 2.0).expect("half dt valid"));
    let delta = (coarse - fine).norm();
    verdict(
        drift <= 1e-6 && delta < 0.01,
        format!("energy drift {drift:.1e} /s, dt vs dt/2 final position {delta:.2e} m"),
    )
}

fn determinism() -> Verdict {
    let sc = nominal();
    let n = 200;
    let jsons: Vec<String> = [1, 2, 3, 8]
        .iter()
        .map(|&w| {
            let (stats, outcomes) = run_campaign_with_workers(&sc, n, w).expect("campaign runs");
            Summary::new(sc.hash(), sc.sim.master_seed, &stats, &outcomes).to_json()
        })
        .collect();
    verdict(
        jsons.windows(2).all(|w| w[0] == w[1]),
        format!("{n}-run summary JSON identical for 1, 2, 3, 8 workers"),
    )
}

fn compensation_efficacy() -> Verdict {
    let on = nominal();
    let mut off = on.clone();
    off.leg_servo.compensation = false;
    let mean_miss = |o: &[RunOutcome]| {
        let v: Vec<f64> = o.iter().filter_map(|o| o.vertical_miss()).map(f64::abs).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let (s_on, o_on) = run_campaign(&on, 100).expect("campaign runs");
    let (s_off, o_off) = run_campaign(&off, 100).expect("campaign runs");
    let (m_on, m_off) = (mean_miss(&o_on), mean_miss(&o_off));
    verdict(
        s_on.success_rate >= s_off.success_rate && m_on < m_off,
        format!(
            "leg on: success {:.2}, mean |miss| {m_on:.4} m; leg off: success {:.2}, mean |miss| {m_off:.4} m",
            s_on.success_rate, s_off.success_rate
        ),
    )
}

fn main() {
    let sc = nominal();
    let ((stats, outcomes), elapsed) = timed(|| run_campaign(&sc, 500).expect("campaign runs"));

    let results = [
        ("1 speed/pitch envelope", speed_pitch_envelope()),
        ("2 altitude capture", altitude_capture()),
        ("3 accuracy envelope", accuracy_envelope(&stats, elapsed)),
        ("4 success rate", success_rate(&stats, &outcomes)),
        ("5 trigger correctness", trigger_correctness(&sc, 100)),
        ("6 oracle equivalences", oracle_equivalences()),
        ("7 numerical soundness", numerical_soundness()),
        ("8 determinism", determinism()),
        ("9 compensation efficacy", compensation_efficacy()),
    ];

    let mut failed = 0;
    for (name, v) in &results {
        println!("criterion {name}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
