//! Scenario files, single flights, and Monte Carlo campaigns.

pub mod dispersion;
pub mod flight;
pub mod io;
pub mod rng;
pub mod scenario;
pub mod stats;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use dispersion::{DispersedParameter, Dispersion};
pub use flight::{run_flight, run_flight_with, FlightLog, LogRow, RunOptions, RunOutcome};
pub use io::{read_run_log, read_summary, write_run_log, write_summary, Summary};
pub use scenario::Scenario;
pub use stats::{compute_stats, CampaignStats};

fn check_runs(n_runs: usize) -> Result<()> {
    if n_runs == 0 {
        return Err(Error::config("runs", "must be >= 1"));
    }
    Ok(())
}

fn collect(scenario: &Scenario, n_runs: usize) -> Result<Vec<RunOutcome>> {
    let opts = RunOptions { record_log: false };
    (0..n_runs as u64)
        .into_par_iter()
        .map(|i| run_flight_with(scenario, i, opts).map(|(outcome, _)| outcome))
        .collect()
}

/// Runs `0..n_runs` on the global rayon pool. Crashes are outcomes; only
/// configuration errors (e.g. a dispersion pushing a value out of range) fail
/// the campaign.
pub fn run_campaign(scenario: &Scenario, n_runs: usize) -> Result<(CampaignStats, Vec<RunOutcome>)> {
    check_runs(n_runs)?;
    let outcomes = collect(scenario, n_runs)?;
    Ok((compute_stats(&outcomes), outcomes))
}

/// Same as [`run_campaign`] on a dedicated pool of `workers` threads.
pub fn run_campaign_with_workers(
    scenario: &Scenario,
    n_runs: usize,
    workers: usize,
) -> Result<(CampaignStats, Vec<RunOutcome>)> {
    check_runs(n_runs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let outcomes = pool.install(|| collect(scenario, n_runs))?;
    Ok((compute_stats(&outcomes), outcomes))
}
