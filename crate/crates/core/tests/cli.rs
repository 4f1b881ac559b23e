use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mech_lsh::harness::{ExperimentConfig, TABLE_FILE};
use mech_lsh::loads::CorpusParams;

fn mech_lsh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mech-lsh"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn loads_simulate_evaluate_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let loads = tmp.path().join("loads");
    let hashes = tmp.path().join("ss3");
    ok(&mech_lsh(&[
        "gen-loads",
        "--seed",
        "2",
        "--n",
        "60",
        "--out",
        p(&loads),
    ]));
    assert!(loads.join("loads.csv").exists());
    ok(&mech_lsh(&[
        "simulate",
        "--system",
        "ss:3",
        "--loads",
        p(&loads),
        "--out",
        p(&hashes),
    ]));
    let confusion = tmp.path().join("confusion.csv");
    let report = ok(&mech_lsh(&[
        "evaluate",
        "--hashes",
        p(&hashes),
        "--loads",
        p(&loads),
        "--confusion",
        p(&confusion),
    ]));
    assert_eq!(report["system_id"], "ss:3");
    assert_eq!(report["ns"], 3);
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let matrix = fs::read_to_string(&confusion).unwrap();
    assert_eq!(matrix.lines().count(), 21);
}

#[test]
fn theory_subcommands_print_json() {
    let r = ok(&mech_lsh(&[
        "theory", "radius", "--family", "ss", "--m", "0.5",
    ]));
    // ss radius is 2 m S / L
    assert!((r["value"].as_f64().unwrap() - 0.001).abs() < 1e-15);
    let p2 = ok(&mech_lsh(&["theory", "p2", "--N", "100"]));
    assert!(p2["value"].as_f64().unwrap() > 0.9);
}

#[test]
fn run_and_report_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::desk(1, "store".into());
    config.corpus = CorpusParams::new(1, 10.0, 40);
    config.systems = vec!["ss:2".into(), "custom:short.json".into()];
    fs::write(
        tmp.path().join("short.json"),
        r#"{"outline": [[0,0],[8,0],[8,2],[0,2]], "sensors": 2}"#,
    )
    .unwrap();
    let path = tmp.path().join("config.json");
    fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();

    // one system fails: exit code 1, report still written
    let out = mech_lsh(&["run", "--config", p(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(tmp.path().join("store").join(TABLE_FILE).exists());
    let out = mech_lsh(&["report", "--store", p(&tmp.path().join("store"))]);
    assert_eq!(out.status.code(), Some(1));

    // rerunning without --resume refuses the existing store
    let out = mech_lsh(&["run", "--config", p(&path)]);
    assert_eq!(out.status.code(), Some(2));

    config.systems.pop();
    fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = mech_lsh(&["run", "--config", p(&path), "--force"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(mech_lsh(&["bogus"]).status.code(), Some(2));
    let out = mech_lsh(&["theory", "radius", "--family", "ss", "--m", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn init_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("paper.json");
    ok(&mech_lsh(&[
        "init-config",
        "--preset",
        "paper",
        "--out",
        p(&path),
    ]));
    let config = ExperimentConfig::load(&path).unwrap();
    assert_eq!(config.systems.len(), 63);
    assert_eq!(config.corpus.n, 1000);
}
