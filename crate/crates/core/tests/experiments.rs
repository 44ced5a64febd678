use std::fs;
use std::path::Path;

use txtrack_core::experiments::{run, ExperimentConfig, ExperimentKind};

fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, false, "inline").unwrap()
}

fn read_csvs(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

const CUSTOM: &str = r#"
kind = "custom"
seed = 9
[custom]
budget = 1
policy = "fifo"
transactions = 300
runs = 4
[[custom.queues]]
id = "slow"
arrival = { kind = "exponential", rate = 1.0 }
service = { kind = "exponential", rate = 1.0 }
[[custom.queues]]
id = "fast"
arrival = { kind = "exponential", rate = 1.0 }
service = { kind = "exponential", rate = 5.0 }
"#;

#[test]
fn custom_run_instruments_the_harder_queue() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse(CUSTOM);
    let summary = run(&cfg, tmp.path(), Some(2)).unwrap();
    assert_eq!(summary.config_hash, cfg.hash());
    let alloc = fs::read_to_string(tmp.path().join("allocation.csv")).unwrap();
    let optimal = alloc
        .lines()
        .skip(1)
        .find(|l| l.contains(",optimal,"))
        .unwrap();
    assert!(
        optimal.contains(",slow,") && !optimal.contains("fast"),
        "{optimal}"
    );
    for (_, body) in read_csvs(tmp.path()) {
        let header = body.lines().next().unwrap();
        assert!(header.starts_with("config_hash,seed"), "{header}");
        assert!(body
            .lines()
            .skip(1)
            .all(|l| l.starts_with(&format!("{},9,", cfg.hash()))));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = parse(CUSTOM);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&cfg, a.path(), Some(1)).unwrap();
    run(&cfg, b.path(), Some(3)).unwrap();
    assert_eq!(read_csvs(a.path()), read_csvs(b.path()));
}

#[test]
fn seed_changes_outputs() {
    let mut cfg = parse(CUSTOM);
    let a = tempfile::tempdir().unwrap();
    run(&cfg, a.path(), Some(1)).unwrap();
    cfg.seed = 10;
    let b = tempfile::tempdir().unwrap();
    run(&cfg, b.path(), Some(1)).unwrap();
    assert_ne!(read_csvs(a.path()), read_csvs(b.path()));
}

#[test]
fn config_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    fs::write(&path, CUSTOM).unwrap();
    let from_file = ExperimentConfig::load(&path).unwrap();
    assert_eq!(from_file.hash(), parse(CUSTOM).hash());
    let json = tmp.path().join("c.json");
    fs::write(&json, serde_json::to_string(&from_file).unwrap()).unwrap();
    assert_eq!(
        ExperimentConfig::load(&json).unwrap().hash(),
        from_file.hash()
    );
}

#[test]
fn invalid_config_is_rejected_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = ExperimentConfig::new(ExperimentKind::Fig6);
    cfg.fig6.budget = 50;
    let err = run(&cfg, &out, Some(1)).unwrap_err();
    assert!(err.is_config(), "{err}");
    assert!(!out.exists());
}
