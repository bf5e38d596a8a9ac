use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mbmimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbmimo"))
        .args(args)
        .env_remove("MBMIMO_THREADS")
        .output()
        .unwrap()
}

const SMALL: &str = r#"{
  "array": {"kind": "colinear", "D": 0.02, "spacing": [0.01]},
  "bands": {"f_L": 3.5e9, "f_H": 17.5e9, "B_L": 120e3, "B_H": 480e3, "M_L": 2, "M_H": 2},
  "users": {"K": 2, "distance_range": [50, 150], "gamma": 2.7, "capability": {"case": 1}},
  "power": {"P_T": 2},
  "seeds": {"master": 5, "repetitions": 2},
  "experiment": {"kind": "sweep_spacing", "values": [0.005, 0.01, 0.02]}
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_manifest_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let out = tmp.path().join("out");
    let o = mbmimo(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["outputs"][0], "sweep_spacing.csv");
    let table = fs::read_to_string(out.join("sweep_spacing.csv")).unwrap();
    assert!(table.starts_with("kind,delta1_m,delta2_m,n_elements,mean_sumrate_bps"));
    // 2 kinds x 3 spacings
    assert_eq!(table.lines().count(), 7);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = mbmimo(&["sweep-snr", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", "9"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["sweep_snr.csv", "sweep_snr_runs.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_flag_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let mut tables = Vec::new();
    for seed in ["1", "2"] {
        let dir = tmp.path().join(seed);
        let o = mbmimo(&["sweep-spacing", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        tables.push(fs::read(dir.join("sweep_spacing_runs.csv")).unwrap());
    }
    assert_ne!(tables[0], tables[1]);
}

#[test]
fn missing_total_power_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"array": {"kind": "colinear"}}"#);
    let out = tmp.path().join("out");
    let o = mbmimo(&["bode", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("power.P_T"));
    assert!(!out.exists());
}

#[test]
fn run_needs_an_experiment_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"array": {"kind": "colinear"}, "power": {"P_T": 2}}"#);
    let o = mbmimo(&["run", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.kind"));
}

#[test]
fn preset_is_a_valid_config() {
    let o = mbmimo(&["preset"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = mbmimo_harness::config::Config::from_json(&text).unwrap();
    assert_eq!(cfg, mbmimo_harness::config::Config::preset());
}
