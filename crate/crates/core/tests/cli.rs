use std::path::{Path, PathBuf};

use clfreach::cli::{main_with_args, manifest_path, RunManifest, EXIT_CONFIG, EXIT_IO, EXIT_NOT_CONVERGED, EXIT_OK};
use clfreach::config::Config;
use clfreach::simulator::{read_log, EpisodeOutcome};

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("clfreach").chain(args.iter().copied());
    let code = main_with_args(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, cfg: &Config) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json_pretty()).unwrap();
    path.to_string_lossy().into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn manifest(primary: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(manifest_path(primary)).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for sub in ["gen-dataset", "run", "batch", "plot"] {
        assert!(out.contains(sub), "help lists {sub}");
    }
    assert_eq!(cli(&["--version"]).0, EXIT_OK);
}

#[test]
fn missing_seed_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config::default());
    let (code, _, err) = cli(&["run", "--config", &cfg, "--log", &s(&dir.path().join("x.jsonl"))]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("--seed"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"dt": 0.01, "frobnicate": 1}"#).unwrap();
    let (code, _, err) = cli(&["run", "--config", &s(&path), "--seed", "1", "--log", &s(&dir.path().join("x.jsonl"))]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("frobnicate"));
}

#[test]
fn invalid_config_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config { dt: -1.0, ..Config::default() });
    let (code, _, _) = cli(&["run", "--config", &cfg, "--seed", "1", "--log", &s(&dir.path().join("x.jsonl"))]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn run_writes_log_outcome_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config::default());
    let log = dir.path().join("run.jsonl");
    let (code, out, _) = cli(&["run", "--config", &cfg, "--seed", "4", "--log", &s(&log)]);
    assert_eq!(code, EXIT_OK, "{out}");
    let records = read_log(std::io::BufReader::new(std::fs::File::open(&log).unwrap())).unwrap();
    assert!(!records.is_empty());
    let outcome: EpisodeOutcome =
        serde_json::from_slice(&std::fs::read(dir.path().join("run.jsonl.outcome.json")).unwrap()).unwrap();
    assert!(outcome.time_to_grasp.is_some());
    let m = manifest(&log);
    assert_eq!(m.seed, Some(4));
    assert_eq!(m.config, Config::default());
    assert_eq!(m.outputs.len(), 2);
    assert!(m.finished_unix_ms >= m.started_unix_ms);
}

#[test]
fn run_that_times_out_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config { max_time: 0.05, ..Config::default() });
    let log = dir.path().join("short.jsonl");
    let (code, _, _) = cli(&["run", "--config", &cfg, "--seed", "4", "--log", &s(&log)]);
    assert_eq!(code, EXIT_NOT_CONVERGED);
    assert!(log.exists());
}

#[test]
fn schedule_file_replaces_configured_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config::default());
    let schedule = dir.path().join("schedule.json");
    std::fs::write(&schedule, r#"[{"time": 0.0, "action": {"remove": 0}}]"#).unwrap();
    let log = dir.path().join("s.jsonl");
    let (code, _, err) = cli(&["run", "--config", &cfg, "--seed", "4", "--schedule", &s(&schedule), "--log", &s(&log)]);
    assert!(code == EXIT_OK || code == EXIT_NOT_CONVERGED, "{err}");
    let m = manifest(&log);
    assert_eq!(m.config.schedule.len(), 1);
}

#[test]
fn gen_dataset_writes_n_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config::default());
    let out = dir.path().join("data.jsonl");
    let (code, _, _) = cli(&["gen-dataset", "--config", &cfg, "--out", &s(&out), "--n", "7", "--seed", "3"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 7);
    assert_eq!(manifest(&out).seed, Some(3));
}

#[test]
fn batch_writes_json_and_text_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config::default());
    let out = dir.path().join("table.json");
    let (code, stdout, _) = cli(&[
        "batch",
        "--config",
        &cfg,
        "--episodes",
        "2",
        "--instances",
        "1,2",
        "--seed",
        "5",
        "--workers",
        "2",
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let table: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(table["episodes"], 12);
    let text = std::fs::read_to_string(dir.path().join("table.json.txt")).unwrap();
    assert_eq!(text.trim_end(), stdout.trim_end());
}

#[test]
fn batch_rejects_zero_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config::default());
    let out = s(&dir.path().join("t.json"));
    let (code, _, _) =
        cli(&["batch", "--config", &cfg, "--episodes", "0", "--instances", "1", "--seed", "5", "--out", &out]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn plot_renders_svg_and_reports_missing_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &Config::default());
    let logs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("r{i}.jsonl"))).collect();
    for (i, log) in logs.iter().enumerate() {
        let seed = i.to_string();
        cli(&["run", "--config", &cfg, "--seed", &seed, "--log", &s(log)]);
    }
    let svg = dir.path().join("plot.svg");
    let (code, _, _) = cli(&["plot", "--log", &s(&logs[0]), &s(&logs[1]), "--out", &s(&svg)]);
    assert_eq!(code, EXIT_OK);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"traj\"").count(), 2);

    let missing = s(&dir.path().join("nope.jsonl"));
    let (code, _, _) = cli(&["plot", "--log", &missing, "--out", &s(&svg)]);
    assert_eq!(code, EXIT_IO);
}
