use std::fs;

use ringjam::log::LOG_FORMAT_VERSION;
use ringjam::{compute_metrics, run_session, Condition, Error, ScenarioConfig, SessionLog};

fn short(condition: Condition, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default().with_condition(condition).with_seed(seed);
    cfg.duration = 90.0;
    cfg.transient = 30.0;
    cfg.failure_time = 80.0;
    cfg.failure_window = 10.0;
    cfg
}

#[test]
fn log_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for condition in Condition::ALL {
        let log = run_session(&short(condition, 5)).unwrap();
        let stem = dir.path().join(format!("{condition}"));
        let (table, meta) = log.save(&stem).unwrap();
        assert!(table.exists() && meta.exists());
        let back = SessionLog::load(&stem).unwrap();
        assert_eq!(back, log);
        assert_eq!(compute_metrics(&back).unwrap(), compute_metrics(&log).unwrap());
    }
}

#[test]
fn sidecar_describes_the_table() {
    let log = run_session(&short(Condition::Haptic, 8)).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&log.metadata_json().unwrap()).unwrap();
    assert_eq!(meta["version"], LOG_FORMAT_VERSION);
    assert_eq!(meta["rows"], log.len() as u64);
    assert_eq!(meta["seed"], 8);
    assert_eq!(meta["lengths"].as_array().unwrap().len(), 21);
    assert!(meta["events"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["kind"] == "failure_onset" && e["t"] == 80.0));
}

#[test]
fn corrupted_logs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let log = run_session(&short(Condition::Manual, 1)).unwrap();
    let stem = dir.path().join("s");
    let (table, meta) = log.save(&stem).unwrap();

    let mut bytes = fs::read(&table).unwrap();
    bytes[0] ^= 0xff;
    fs::write(&table, &bytes).unwrap();
    assert!(matches!(SessionLog::load(&stem), Err(Error::MalformedLog(_))));

    bytes[0] ^= 0xff;
    bytes.truncate(bytes.len() - 3);
    fs::write(&table, &bytes).unwrap();
    assert!(SessionLog::load(&stem).is_err());

    log.save(&stem).unwrap();
    let text = fs::read_to_string(&meta).unwrap().replacen("\"rows\": ", "\"rows\": 1", 1);
    fs::write(&meta, text).unwrap();
    assert!(matches!(SessionLog::load(&stem), Err(Error::MalformedLog(_))));
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(
        &path,
        "condition = \"automated\"\nseed = 12\nduration = 120.0\nfailure_time = 100.0\n\n[follower_stopper]\nmax_speed = 6.0\n",
    )
    .unwrap();
    let cfg = ScenarioConfig::load(&path).unwrap();
    assert_eq!(cfg.condition, Condition::Automated);
    assert_eq!(cfg.seed, 12);
    assert_eq!(cfg.follower_stopper.max_speed, 6.0);
    assert_eq!(cfg.follower_stopper.base_gaps, [4.5, 5.25, 6.0]);
    assert_eq!(cfg.dt, ScenarioConfig::default().dt);

    let toml = ringjam::config::default_config_toml();
    assert_eq!(ScenarioConfig::from_toml_str(&toml).unwrap(), ScenarioConfig::default());
}

#[test]
fn invalid_config_files_are_rejected() {
    for text in [
        "dt = 0.0",
        "unknown_key = 1",
        "condition = \"cruise\"",
        "transient = 500.0\nduration = 400.0",
        "[follower_stopper]\nbase_gaps = [6.0, 5.25, 4.5]",
    ] {
        assert!(ScenarioConfig::from_toml_str(text).is_err(), "{text}");
    }
}
