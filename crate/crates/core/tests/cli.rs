use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fvqoc"))
}

fn small_config(dir: &Path, experiment: &str) -> PathBuf {
    let cfg = serde_json::json!({
        "experiment": experiment,
        "seed": 3,
        "problem": {
            "n_qubits": 1,
            "controls": [[{"pauli": "X"}], [{"pauli": "Z"}]],
            "noise": [{"operator": [{"pauli": "Z"}], "kind": "white", "gamma": 0.05}],
            "target": {"kind": "hamiltonian", "operator": [{"pauli": "X", "coeff": -1.0}]},
            "initial_state": [[1, 0], [0, 0]],
            "grid": {"dt": 0.05, "steps": 10},
            "weights": {"lambda": 0.1, "mu": 10.0, "nu": 1.0},
            "schedule": {"iterations": 2},
            "trials": {"gradient": 8, "evaluation": 8}
        },
        "simulate": {"trials": 50}
    });
    let path = dir.join(format!("{experiment}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn optimize_writes_results_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "optimize");
    let out = dir.path().join("out");
    let status = bin().args(["optimize", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    for name in [
        "config.json",
        "seeds.json",
        "summary.json",
        "history_vqoc.csv",
        "history_fvqoc_end.csv",
        "history_fvqoc_continuous.csv",
        "pulse_vqoc.csv",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let history = std::fs::read_to_string(out.join("history_vqoc.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    let leftovers: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn simulate_reports_lindblad_distance_for_white_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "simulate");
    let out = dir.path().join("out");
    let status = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["lindblad_trace_distance"].as_f64().unwrap() < 0.05);
    let fidelity = std::fs::read_to_string(out.join("fidelity.csv")).unwrap();
    assert_eq!(fidelity.lines().count(), 12);
}

#[test]
fn identical_seeds_give_identical_histories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "optimize");
    let mut runs = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let status = bin()
            .args(["optimize", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        runs.push(std::fs::read_to_string(out.join("history_fvqoc_continuous.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn missing_config_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["optimize", "--config"])
        .arg(dir.path().join("nope.json"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn unknown_key_exits_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"experiment": "optimize", "seed": 1, "problem": {"n_qubits": 1, "bogus": 2}}"#).unwrap();
    let out = bin().args(["optimize", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem"));
}

#[test]
fn mismatched_subcommand_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "simulate");
    let status = bin()
        .args(["gate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn packaged_configs_parse_and_build() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let cfg = fvqoc_core::config::load_config(&path).unwrap();
        cfg.validate().unwrap();
        if let Some(p) = &cfg.problem {
            p.build(cfg.seed).unwrap();
        }
        seen += 1;
    }
    assert!(seen >= 4);
}
