use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn perchsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perchsim"))
        .args(args)
        .env_remove("PERCHSIM_OUT")
        .output()
        .expect("binary runs")
}

fn nominal() -> String {
    scenarios().join("nominal.toml").display().to_string()
}

#[test]
fn fly_writes_log_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = perchsim(&["fly", "--scenario", &nominal(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let log = perchsim::campaign::read_run_log(dir.path().join("flight.csv")).unwrap();
    assert!(!log.rows.is_empty());
    assert!(String::from_utf8_lossy(&out.stdout).contains("perched"));
}

#[test]
fn campaign_is_reproducible_across_invocations() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = perchsim(&[
            "campaign",
            "--scenario",
            &nominal(),
            "--runs",
            "20",
            "--seed",
            "11",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ja = fs::read(a.path().join("summary.json")).unwrap();
    let jb = fs::read(b.path().join("summary.json")).unwrap();
    assert_eq!(ja, jb);
    let summary = perchsim::campaign::read_summary(a.path().join("summary.json")).unwrap();
    assert_eq!(summary.master_seed, 11);
    assert_eq!(summary.n_runs, 20);
}

#[test]
fn invalid_scenario_exits_one_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("nominal.toml"))
        .unwrap()
        .replace("mass_kg = 0.7", "mass_kg = -0.7");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = perchsim(&["fly", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vehicle.mass_kg"));
}

#[test]
fn unknown_scenario_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("nominal.toml"))
        .unwrap()
        .replace("mass_kg = 0.7", "mass_kg = 0.7\nmass_lb = 1.5");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = perchsim(&["fly", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mass_lb"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(perchsim(&[]).status.code(), Some(2));
    assert_eq!(perchsim(&["fly"]).status.code(), Some(2));
    assert_eq!(perchsim(&["campaign", "--scenario", &nominal(), "--runs", "0"]).status.code(), Some(2));
    assert_eq!(perchsim(&["fly", "--scenario", &nominal(), "--bogus"]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    assert_eq!(perchsim(&["--help"]).status.code(), Some(0));
}
