use std::process::Command;

use chx::harness::{ExperimentConfig, EXPERIMENTS};
use chx::Error;

fn config_key(text: &str) -> String {
    match ExperimentConfig::from_toml_str(text) {
        Err(Error::Config { key, .. }) => key,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn every_experiment_has_valid_defaults_that_round_trip() {
    for name in EXPERIMENTS {
        let cfg = ExperimentConfig::defaults(name).unwrap();
        let echo = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml_str(&echo).unwrap();
        assert_eq!(back.experiment, cfg.experiment, "{name}");
    }
}

#[test]
fn errors_name_the_offending_key() {
    assert_eq!(config_key("seed = 1\n"), "experiment");
    assert_eq!(config_key("experiment = \"nope\"\n"), "experiment");
    assert_eq!(config_key("experiment = \"wick\"\nmc = 0\n"), "mc");
    assert_eq!(config_key("experiment = \"wick\"\nseed = -1\n"), "seed");
    assert_eq!(config_key("experiment = \"wick\"\nstray = 1\n"), "stray");
    assert_eq!(config_key("experiment = \"wick\"\n[wick]\npaths = 1\n"), "wick.paths");
    assert_eq!(config_key("experiment = \"wick\"\n[wick]\ntimes = [0.1, 0.01]\n"), "wick.times");
    assert_eq!(config_key("experiment = \"wick\"\n[wick]\nbogus = 3\n"), "wick.bogus");
    assert_eq!(config_key("experiment = \"lemma2\"\n[lemma2]\ncases = [{ d = 1, alpha = 0.5, beta = 0.4 }]\n"), "lemma2.cases");
    assert_eq!(config_key("experiment = \"solve\"\n[solve]\nhorizon = 0.0000123\n"), "solve.horizon");
    assert_eq!(config_key("experiment = \"solve\"\n[solve.solver]\nalpha = 3.0\n"), "solve.solver.alpha");
    assert_eq!(config_key("experiment = \"regularity\"\n[regularity]\ngrids = [{ d = 1, n = 100 }]\n"), "regularity.grids");
    assert_eq!(config_key("experiment = \"converge\"\n[converge]\neps = [0.1, 0.2]\n"), "converge.eps");
}

#[test]
fn mc_override_reaches_the_parameters() {
    let cfg = ExperimentConfig::from_toml_str("experiment = \"wick\"\nmc = 17\n").unwrap();
    assert!(cfg.to_toml().unwrap().contains("paths = 17"));
    let cfg = ExperimentConfig::defaults("stability").unwrap().with_overrides(Some(3), Some(5), None).unwrap();
    assert_eq!(cfg.seed, 3);
    assert!(cfg.to_toml().unwrap().contains("pairs = 5"));
}

#[test]
fn command_line_names_must_agree_with_the_config() {
    assert!(ExperimentConfig::for_experiment("wick", "").is_ok());
    assert!(matches!(ExperimentConfig::for_experiment("wick", "experiment = \"bony\"\n"), Err(Error::Config { .. })));
    assert!(matches!(ExperimentConfig::for_experiment("nope", ""), Err(Error::Config { .. })));
}

#[test]
fn cli_runs_an_experiment_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "[partition-check]\ngrids = [{ d = 1, n = 64 }]\nfields = 3\n").unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_chx"))
        .args(["partition-check", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "9", "--mc", "2"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(String::from_utf8_lossy(&status.stdout).contains("PASS partition identity d1n64"));
    let csv = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(csv.starts_with("d,n,identity_deviation,completeness_deviation\n") && !csv.contains('\r'));
    let manifest: toml::Table = std::fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(9));
    assert_eq!(manifest["passed"].as_bool(), Some(true));
    assert!(manifest["config"].as_str().unwrap().contains("fields = 2"));
}

#[test]
fn cli_rejects_bad_configs_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "[wick]\neps = -1.0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_chx")).args(["wick", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wick.eps"));
    let out = Command::new(env!("CARGO_BIN_EXE_chx")).args(["nope", "--config"]).arg(&config).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in EXPERIMENTS {
        let text = std::fs::read_to_string(dir.join(format!("{name}.toml"))).unwrap();
        let cfg = ExperimentConfig::for_experiment(name, &text).unwrap();
        assert_eq!(cfg.experiment.name(), name);
    }
}
