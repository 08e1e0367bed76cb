use std::fs;
use std::path::Path;
use std::process::Command;

use mpp_rbsde::config::RunConfig;

const BIN: &str = env!("CARGO_BIN_EXE_mpp-rbsde");

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn exit_code(args: &[&str]) -> i32 {
    Command::new(BIN).args(args).output().unwrap().status.code().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn shipped_configs_pass() {
    for name in ["barrier_step.toml", "american_put.toml", "picard.toml", "mpp_only.toml", "oracle_small.toml"] {
        for verb in ["solve", "norms", "simulate"] {
            assert_eq!(exit_code(&[verb, "--config", &config(name)]), 0, "{verb} {name}");
        }
    }
    assert_eq!(exit_code(&["picard", "--config", &config("picard.toml")]), 0);
    assert_eq!(exit_code(&["oracle", "--config", &config("oracle_small.toml")]), 0);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exit_code(&["solve"]), 2);
    assert_eq!(exit_code(&["solve", "--config", "/nonexistent/cfg.toml"]), 2);
    assert_eq!(exit_code(&["solve", "--config", &config("barrier_step.toml"), "--scale", "huge"]), 2);

    let step = fs::read_to_string(config("barrier_step.toml")).unwrap();
    let unknown = write_config(dir.path(), &format!("{step}\n[extra]\nx = 1\n"));
    assert_eq!(exit_code(&["solve", "--config", &unknown]), 2);

    let above = write_config(dir.path(), &step.replace("values = [0.5, -10.0]", "values = [0.5, 3.0]"));
    assert_eq!(exit_code(&["solve", "--config", &above]), 2);

    let picard = fs::read_to_string(config("picard.toml")).unwrap();
    let small_beta = write_config(dir.path(), &picard.replace("beta = 2.0", "beta = 0.1"));
    let out = Command::new(BIN).args(["picard", "--config", &small_beta]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("generator.beta"));

    // enumeration cap
    assert_eq!(exit_code(&["oracle", "--config", &config("picard.toml")]), 2);
}

#[test]
fn artifacts_are_deterministic_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_string_lossy().into_owned();
    let read_all = || -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    assert_eq!(exit_code(&["picard", "--config", &config("picard.toml"), "--out", &out_s, "--seed", "9"]), 0);
    let first = read_all();
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["config.toml", "nodes.csv", "norms.csv", "picard_trace.csv", "summary.json"]);
    assert_eq!(exit_code(&["picard", "--config", &config("picard.toml"), "--out", &out_s, "--seed", "9"]), 0);
    assert_eq!(first, read_all());

    let echoed = RunConfig::load(&out.join("config.toml")).unwrap();
    let mut original = RunConfig::load(config("picard.toml").as_ref()).unwrap();
    original.seed = 9;
    original.output = Some(out.clone());
    assert_eq!(echoed, original);

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["solve"]["picard"]["converged"].as_bool().unwrap());
}

#[test]
fn simulate_writes_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert_eq!(exit_code(&["simulate", "--config", &config("mpp_only.toml"), "--out", out.to_str().unwrap()]), 0);
    let paths = fs::read_to_string(out.join("paths.csv")).unwrap();
    assert!(paths.starts_with("path,seed,time,mark"));
    assert!(paths.lines().count() > 1_000);
}
