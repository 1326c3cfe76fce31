use std::collections::BTreeMap;

use crate::fsm::Phase;

use super::flight::RunOutcome;

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignStats {
    pub n_runs: usize,
    pub success_rate: f64,
    /// Over runs that reached the branch plane.
    pub mean_abs_vertical_error: Option<f64>,
    pub p90_lateral_error: Option<f64>,
    pub speed_band: Option<(f64, f64)>,
    pub altitude_capture_band: Option<(f64, f64)>,
    /// Non-perched runs keyed by failure reason, or `crashed` / `no_contact`.
    pub failure_histogram: BTreeMap<String, usize>,
}

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

fn band(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Aggregates in run-index order so the result does not depend on which
/// worker produced which outcome.
pub fn compute_stats(outcomes: &[RunOutcome]) -> CampaignStats {
    let mut ordered: Vec<&RunOutcome> = outcomes.iter().collect();
    ordered.sort_by_key(|o| o.run_index);

    let n_runs = ordered.len();
    let perched = ordered.iter().filter(|o| o.perched()).count();
    let success_rate = if n_runs == 0 { 0.0 } else { perched as f64 / n_runs as f64 };

    let vertical: Vec<f64> = ordered.iter().filter_map(|o| o.vertical_error).map(f64::abs).collect();
    let mean_abs_vertical_error = if vertical.is_empty() {
        None
    } else {
        Some(vertical.iter().sum::<f64>() / vertical.len() as f64)
    };

    let mut lateral: Vec<f64> = ordered.iter().filter_map(|o| o.lateral_error).map(f64::abs).collect();
    lateral.sort_by(f64::total_cmp);
    let p90_lateral_error = nearest_rank(&lateral, 0.9);

    let speed_band = band(ordered.iter().filter_map(|o| o.contact_speed));
    let altitude_capture_band = band(ordered.iter().filter_map(|o| o.distance_at_altitude_capture));

    let mut failure_histogram = BTreeMap::new();
    for o in ordered.iter().filter(|o| !o.perched()) {
        let key = if o.terminal_phase == Phase::Crashed {
            "crashed"
        } else {
            o.grasp.as_ref().map_or("no_contact", |g| g.failure_reason.as_str())
        };
        *failure_histogram.entry(key.to_string()).or_insert(0) += 1;
    }

    CampaignStats {
        n_runs,
        success_rate,
        mean_abs_vertical_error,
        p90_lateral_error,
        speed_band,
        altitude_capture_band,
        failure_histogram,
    }
}
