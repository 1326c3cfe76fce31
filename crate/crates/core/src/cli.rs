//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when the scenario (or anything downstream of
//! it) is rejected, 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calibrate::{calibrate, calibrated_header};
use crate::campaign::{run_campaign, run_flight, write_run_log, write_summary, Scenario, Summary};
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCENARIO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fly,
    Campaign,
    Calibrate,
}

#[derive(Debug, Parser)]
#[command(name = "perchsim", version, about = "Perching flight simulator and Monte Carlo campaign harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fly one run and write its CSV log.
    Fly(CommonArgs),
    /// Run a Monte Carlo campaign and write the summary JSON.
    Campaign(CommonArgs),
    /// Calibrate trim and gains and write the resulting scenario.
    Calibrate(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario TOML file
    #[arg(long)]
    scenario: PathBuf,
    /// Number of Monte Carlo runs (campaign only)
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Override the scenario master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, env = "PERCHSIM_OUT", default_value = ".")]
    out: PathBuf,
    /// Override the integration step in seconds
    #[arg(long)]
    dt: Option<f64>,
    /// Print per-run detail; repeat for more
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub mode: Mode,
    pub scenario_path: PathBuf,
    pub runs: usize,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub dt: Option<f64>,
    pub verbosity: u8,
}

pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (mode, a) = match cli.command {
        Command::Fly(a) => (Mode::Fly, a),
        Command::Campaign(a) => (Mode::Campaign, a),
        Command::Calibrate(a) => (Mode::Calibrate, a),
    };
    Ok(CliConfig {
        mode,
        scenario_path: a.scenario,
        runs: a.runs as usize,
        seed: a.seed,
        output_dir: a.out,
        dt: a.dt,
        verbosity: a.verbose,
    })
}

fn load(config: &CliConfig) -> Result<Scenario> {
    let mut scenario = Scenario::load(&config.scenario_path)?;
    if let Some(seed) = config.seed {
        scenario.sim.master_seed = seed;
    }
    if let Some(dt) = config.dt {
        scenario = scenario.with_dt(dt)?;
    }
    Ok(scenario)
}

fn output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn fmt_opt(v: Option<f64>, unit: &str) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4} {unit}"))
}

fn fmt_band(v: Option<(f64, f64)>, unit: &str) -> String {
    v.map_or_else(|| "n/a".to_string(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}] {unit}"))
}

fn fly(config: &CliConfig, out: &mut impl Write) -> Result<()> {
    let scenario = load(config)?;
    output_dir(&config.output_dir)?;
    let (outcome, log) = run_flight(&scenario, 0)?;
    let path = config.output_dir.join("flight.csv");
    write_run_log(&log, &path)?;
    let reason = outcome.grasp.as_ref().map_or("no_contact", |g| g.failure_reason.as_str());
    let _ = writeln!(out, "terminal phase:   {}", outcome.terminal_phase);
    let _ = writeln!(out, "failure reason:   {reason}");
    let _ = writeln!(out, "vertical error:   {}", fmt_opt(outcome.vertical_error, "m"));
    let _ = writeln!(out, "lateral error:    {}", fmt_opt(outcome.lateral_error, "m"));
    let _ = writeln!(out, "contact speed:    {}", fmt_opt(outcome.contact_speed, "m/s"));
    let _ = writeln!(
        out,
        "impact force:     {}",
        fmt_opt(outcome.grasp.as_ref().map(|g| g.impact_force), "N")
    );
    let _ = writeln!(out, "altitude capture: {}", fmt_opt(outcome.distance_at_altitude_capture, "m"));
    let _ = writeln!(out, "flight time:      {:.3} s", outcome.flight_time);
    if config.verbosity > 0 {
        for t in &outcome.transitions {
            let _ = writeln!(out, "  {:>8.3} s  {}", t.time_s, t.phase);
        }
    }
    let _ = writeln!(out, "log:              {}", path.display());
    Ok(())
}

fn campaign(config: &CliConfig, out: &mut impl Write) -> Result<()> {
    let scenario = load(config)?;
    output_dir(&config.output_dir)?;
    let (stats, outcomes) = run_campaign(&scenario, config.runs)?;
    let summary = Summary::new(scenario.hash(), scenario.sim.master_seed, &stats, &outcomes);
    let path = config.output_dir.join("summary.json");
    write_summary(&summary, &path)?;
    if config.verbosity > 0 {
        for o in &outcomes {
            let _ = writeln!(
                out,
                "run {:>5}  {:<18} v={} l={}",
                o.run_index,
                o.terminal_phase.as_str(),
                fmt_opt(o.vertical_error, "m"),
                fmt_opt(o.lateral_error, "m")
            );
        }
    }
    let _ = writeln!(out, "runs:                   {}", stats.n_runs);
    let _ = writeln!(out, "success_rate:           {:.4}", stats.success_rate);
    let _ = writeln!(out, "mean |vertical error|:  {}", fmt_opt(stats.mean_abs_vertical_error, "m"));
    let _ = writeln!(out, "p90 |lateral error|:    {}", fmt_opt(stats.p90_lateral_error, "m"));
    let _ = writeln!(out, "contact speed band:     {}", fmt_band(stats.speed_band, "m/s"));
    let _ = writeln!(out, "altitude capture band:  {}", fmt_band(stats.altitude_capture_band, "m"));
    for (reason, count) in &stats.failure_histogram {
        let _ = writeln!(out, "  {reason:<22} {count}");
    }
    let _ = writeln!(out, "summary:                {}", path.display());
    Ok(())
}

fn calibrate_cmd(config: &CliConfig, out: &mut impl Write) -> Result<()> {
    let base = load(config)?;
    output_dir(&config.output_dir)?;
    let (scenario, report) = calibrate(&base)?;
    let path = config.output_dir.join("nominal.toml");
    scenario.save(&path, &calibrated_header(&report))?;
    let m = &report.metrics;
    let _ = writeln!(out, "wing area:        {:.6} m^2", report.trim.wing_area);
    let _ = writeln!(out, "flap thrust coef: {:.6} N s^2", report.trim.flap_thrust_coeff);
    let _ = writeln!(out, "pitch gains:      {:?}", report.pitch_gains);
    let _ = writeln!(out, "altitude gains:   {:?}", report.alt_gains);
    let _ = writeln!(out, "settle time:      {}", fmt_opt(m.settle_time, "s"));
    let _ = writeln!(out, "max pitch:        {:.3} deg", m.max_pitch.to_degrees());
    let _ = writeln!(out, "steady speed:     {}", fmt_opt(m.steady_speed, "m/s"));
    let _ = writeln!(out, "altitude capture: {}", fmt_opt(m.capture_distance, "m"));
    let _ = writeln!(out, "scenario:         {}", path.display());
    Ok(())
}

pub fn execute(config: &CliConfig, out: &mut impl Write) -> Result<()> {
    match config.mode {
        Mode::Fly => fly(config, out),
        Mode::Campaign => campaign(config, out),
        Mode::Calibrate => calibrate_cmd(config, out),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    match execute(&config, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_SCENARIO
        }
    }
}
