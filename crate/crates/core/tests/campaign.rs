use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};

use carnot_sio::experiments::{run_campaign, Experiment, ExperimentConfig};

const SMALL: &str = r#"{
    "curve": {"spec": "circle-lift", "points": 513},
    "epsilons": {"lo": 2, "hi": 6},
    "group_info": {"samples": 500},
    "flatness": {"points": 4097, "scale_exponents": [4, 8]},
    "annular": {"max_k": 6, "panels": 16}
}"#;

fn small_config(dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_json(SMALL).unwrap();
    c.output_dir = Some(dir.to_path_buf());
    c
}

fn data_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv") || n.ends_with("_tree.json"))
        .collect();
    names.sort();
    names
}

#[test]
fn campaign_reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_campaign(&Experiment::ALL, &small_config(a.path())).unwrap();
    let rb = run_campaign(&Experiment::ALL, &small_config(b.path())).unwrap();
    assert_eq!(ra.len(), Experiment::ALL.len());
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.metrics, y.metrics);
        assert_eq!(serde_json::to_string(&x.summary).unwrap(), serde_json::to_string(&y.summary).unwrap());
    }
    let files = data_files(a.path());
    assert_eq!(files, data_files(b.path()));
    assert!(files.len() >= 12, "{files:?}");
    for f in &files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn reports_embed_config_seed_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.seed = 77;
    run_campaign(&[Experiment::Annular], &c).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("annular.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 77);
    assert_eq!(report["config"]["seed"], 77);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    let log = fs::read_to_string(dir.path().join("campaign.log")).unwrap();
    assert_eq!(log.lines().count(), 1);
    assert!(dir.path().join("baselines.json").exists());
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_carnot-sio");
    let run = |cmd: &mut Command| cmd.stdout(Stdio::null()).stderr(Stdio::null()).status().unwrap().code();
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, SMALL).unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(Command::new(bin).args(["annular", "--config"]).arg(&good).arg("--out").arg(&out)), Some(0));
    assert!(out.join("annular.csv").exists());

    let strict = dir.path().join("strict.json");
    fs::write(&strict, r#"{"annular": {"kernels": ["inv-dist"], "max_k": 4}, "thresholds": {"log_tolerance": 1e-15}}"#)
        .unwrap();
    assert_eq!(
        run(Command::new(bin).args(["annular", "--config"]).arg(&strict).arg("--out").arg(dir.path().join("strict"))),
        Some(1)
    );

    assert_eq!(run(Command::new(bin).args(["lift", "--out"]).arg(dir.path())), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"curve": {"spec": "spiral"}}"#).unwrap();
    assert_eq!(run(Command::new(bin).args(["lift", "--config"]).arg(&bad).arg("--out").arg(dir.path())), Some(2));
}
