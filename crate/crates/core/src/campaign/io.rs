//! Run logs (CSV, one row per physics step) and the campaign summary (JSON).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::flight::{FlightLog, LogRow, RunOutcome};
use super::stats::{compute_stats, CampaignStats};

pub const LOG_COLUMNS: [&str; 18] = [
    "time_s",
    "x_m",
    "y_m",
    "z_m",
    "vx_mps",
    "vy_mps",
    "vz_mps",
    "pitch_rad",
    "yaw_rad",
    "flap_freq_hz",
    "flap_phase_rad",
    "leg_angle_rad",
    "elevator_rad",
    "rudder_rad",
    "phase",
    "detector_valid",
    "vertical_offset_m",
    "lateral_offset_m",
];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_run_log(log: &FlightLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    // Header written explicitly so an empty log still carries it.
    w.write_record(LOG_COLUMNS).map_err(|e| csv_error(path, e))?;
    for row in &log.rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_run_log(path: impl AsRef<Path>) -> Result<FlightLog> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().ne(LOG_COLUMNS) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "unexpected CSV header".into(),
        });
    }
    let rows = r
        .deserialize::<LogRow>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok(FlightLog { rows })
}

/// Round to six significant digits.
pub fn six_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario_hash: String,
    pub master_seed: u64,
    pub n_runs: usize,
    pub success_rate: f64,
    pub mean_abs_vertical_error_m: Option<f64>,
    pub p90_lateral_error_m: Option<f64>,
    pub speed_band_mps: Option<[f64; 2]>,
    pub altitude_capture_band_m: Option<[f64; 2]>,
    pub failure_histogram: BTreeMap<String, usize>,
    pub per_run: Vec<RunOutcome>,
}

impl Summary {
    pub fn new(scenario_hash: String, master_seed: u64, stats: &CampaignStats, outcomes: &[RunOutcome]) -> Self {
        let band = |b: Option<(f64, f64)>| b.map(|(lo, hi)| [six_significant(lo), six_significant(hi)]);
        let mut per_run = outcomes.to_vec();
        per_run.sort_by_key(|o| o.run_index);
        Summary {
            scenario_hash,
            master_seed,
            n_runs: stats.n_runs,
            success_rate: six_significant(stats.success_rate),
            mean_abs_vertical_error_m: stats.mean_abs_vertical_error.map(six_significant),
            p90_lateral_error_m: stats.p90_lateral_error.map(six_significant),
            speed_band_mps: band(stats.speed_band),
            altitude_capture_band_m: band(stats.altitude_capture_band),
            failure_histogram: stats.failure_histogram.clone(),
            per_run,
        }
    }

    /// Summary rebuilt from this summary's own per-run records.
    pub fn recomputed(&self) -> Summary {
        let stats = compute_stats(&self.per_run);
        Summary::new(self.scenario_hash.clone(), self.master_seed, &stats, &self.per_run)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub fn write_summary(summary: &Summary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(summary.to_json().as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Summary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsm::Phase;
    use proptest::prelude::*;

    #[test]
    fn empty_log_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_run_log(&FlightLog::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", LOG_COLUMNS.join(",")));
        assert!(read_run_log(&path).unwrap().rows.is_empty());
    }

    #[test]
    fn six_digits() {
        assert_eq!(six_significant(2.0 / 3.0), 0.666667);
        assert_eq!(six_significant(0.6), 0.6);
        assert_eq!(six_significant(123.4567891), 123.457);
        assert_eq!(six_significant(0.0), 0.0);
    }

    #[test]
    fn io_errors_carry_path() {
        let err = read_run_log("/nonexistent/dir/run.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/run.csv"));
        let err = write_summary(
            &Summary::new("h".into(), 1, &compute_stats(&[]), &[]),
            "/nonexistent/dir/summary.json",
        )
        .unwrap_err();
        assert!(err.to_string().contains("summary.json"));
    }

    fn row_strategy() -> impl Strategy<Value = LogRow> {
        (
            proptest::array::uniform12(-1e3..1e3f64),
            proptest::array::uniform4(-10.0..10.0f64),
            0usize..7,
            any::<bool>(),
        )
            .prop_map(|(a, b, phase, valid)| LogRow {
                time_s: a[0],
                x_m: a[1],
                y_m: a[2],
                z_m: a[3],
                vx_mps: a[4],
                vy_mps: a[5],
                vz_mps: a[6],
                pitch_rad: a[7],
                yaw_rad: a[8],
                flap_freq_hz: a[9],
                flap_phase_rad: a[10],
                leg_angle_rad: a[11],
                elevator_rad: b[0],
                rudder_rad: b[1],
                phase: Phase::ALL[phase],
                detector_valid: valid,
                vertical_offset_m: b[2],
                lateral_offset_m: b[3],
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(row_strategy(), 0..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("run.csv");
            let log = FlightLog { rows };
            write_run_log(&log, &path).unwrap();
            let back = read_run_log(&path).unwrap();
            prop_assert_eq!(back.rows.len(), log.rows.len());
            for (a, b) in back.rows.iter().zip(&log.rows) {
                prop_assert!((a.time_s - b.time_s).abs() <= 1e-9);
                prop_assert!((a.z_m - b.z_m).abs() <= 1e-9);
                prop_assert!((a.lateral_offset_m - b.lateral_offset_m).abs() <= 1e-9);
                prop_assert_eq!(a.phase, b.phase);
                prop_assert_eq!(a.detector_valid, b.detector_valid);
            }
            prop_assert_eq!(back, log);
        }
    }
}
