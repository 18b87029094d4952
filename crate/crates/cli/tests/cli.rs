use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use gossipfpp_cli::config::{ExperimentConfig, Kind};
use gossipfpp_cli::{prepare, run, sweep, Overrides};

const BIN: &str = env!("CARGO_BIN_EXE_gossipfpp");

const NASH: &str = r#"kind = "nash"
seed = 3
replicates = 300

[topology]
kind = "complete"
n = 1000

[reward]
family = "linear"
"#;

const SWEEP: &str = r#"kind = "sweep"
seed = 4
replicates = 5

[sweep]
parameter = "strategy.rate"
values = [2.0]
response = "/window_mean"

[sweep.base]
kind = "simulate"

[sweep.base.topology]
kind = "torus_nn"
side = 20

[sweep.base.strategy]
shape = "uniform"
rate = 1.0
"#;

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && !p.ends_with("record.json"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn negative_rate_exits_2_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "kind = \"simulate\"\nseed = 1\n[topology]\nkind = \"complete\"\nn = 50\n[strategy]\nshape = \"uniform\"\nrate = -0.5\n",
    )
    .unwrap();
    let out = Command::new(BIN)
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("strategy.rate"), "{err}");
}

#[test]
fn wrong_subcommand_for_kind_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("n.toml");
    std::fs::write(&cfg, NASH).unwrap();
    let out = Command::new(BIN)
        .args(["fquad", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_round_trips_and_hash_is_stable() {
    for text in [NASH, SWEEP] {
        let a = ExperimentConfig::parse(text).unwrap();
        let b = ExperimentConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(a.to_toml(), b.to_toml());
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
    let a = ExperimentConfig::parse(NASH).unwrap();
    let b = ExperimentConfig::parse(&NASH.replace("seed = 3", "seed = 5")).unwrap();
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn unknown_fields_are_rejected() {
    let text = NASH.replace("replicates = 300", "replicates = 300\nreplicate = 1");
    assert!(ExperimentConfig::parse(&text).is_err());
}

#[test]
fn single_point_sweep_matches_direct_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = prepare(
        ExperimentConfig::parse(SWEEP).unwrap(),
        Some(Kind::Sweep),
        Overrides::default(),
    )
    .unwrap();
    run(&cfg, &tmp.path().join("sweep")).unwrap();
    let point = sweep::point_config(&cfg, 0).unwrap();
    run(&point, &tmp.path().join("direct")).unwrap();
    let swept = files(&tmp.path().join("sweep/points/000"));
    let direct = files(&tmp.path().join("direct"));
    assert!(swept.contains_key("summary.json"));
    assert_eq!(swept, direct);
}

#[test]
fn seed_override_changes_outputs_and_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(SWEEP).unwrap();
    let base = sweep::point_config(&cfg, 0).unwrap();
    let other = prepare(
        base.clone(),
        None,
        Overrides {
            seed: Some(99),
            replicates: None,
        },
    )
    .unwrap();
    assert_eq!(other.seed(), 99);
    run(&base, &tmp.path().join("a")).unwrap();
    run(&other, &tmp.path().join("b")).unwrap();
    let (a, b) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    assert_ne!(a["summary.json"], b["summary.json"]);
    assert!(String::from_utf8_lossy(&b["config.toml"]).contains("seed = 99"));
}

#[test]
fn nash_run_finds_half_on_complete_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = prepare(
        ExperimentConfig::parse(NASH).unwrap(),
        Some(Kind::Nash),
        Overrides::default(),
    )
    .unwrap();
    let record = run(&cfg, tmp.path()).unwrap();
    assert!(record.outputs.iter().any(|f| f == "trace.csv"));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("summary.json")).unwrap()).unwrap();
    let theta = summary["rates"][0].as_f64().unwrap();
    assert!((theta - 0.5).abs() < 0.05, "{theta}");
}
