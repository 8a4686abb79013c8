use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use plap::campaign::{Manifest, CHECKS_FILE, CONSTANTS_FILE, MANIFEST_FILE, REPORT_FILE};

fn plap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report_without_wall_time(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "scenario = \n[grid\n").unwrap();
    let o = plap(dir.path(), &["verify", "lemmas", "--config", "bad.toml", "--out", "out"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("out").exists());

    fs::write(dir.path().join("other.toml"), "scenario = \"verify-energy\"\n").unwrap();
    assert_eq!(code(&plap(dir.path(), &["verify", "lemmas", "--config", "other.toml", "--out", "out"])), 2);
    assert_eq!(code(&plap(dir.path(), &["verify", "nonsense", "--out", "out"])), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn subcritical_exponent_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p1.toml"), "scenario = \"verify-lipschitz\"\n[flux]\np = [1.0]\n").unwrap();
    let o = plap(dir.path(), &["verify", "lipschitz", "--config", "p1.toml", "--out", "out"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("precondition"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn lemmas_pass_and_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = plap(dir.path(), &["verify", "verify-lemmas", "--seed", "5", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(report_without_wall_time(&a.join(REPORT_FILE)), report_without_wall_time(&b.join(REPORT_FILE)));
    assert_eq!(fs::read(a.join(CHECKS_FILE)).unwrap(), fs::read(b.join(CHECKS_FILE)).unwrap());
    assert_eq!(fs::read(a.join(MANIFEST_FILE)).unwrap(), fs::read(b.join(MANIFEST_FILE)).unwrap());

    // Every check is named once and the manifest lists exactly the report's checks.
    let manifest: Manifest = serde_json::from_slice(&fs::read(a.join(MANIFEST_FILE)).unwrap()).unwrap();
    let report = report_without_wall_time(&a.join(REPORT_FILE));
    let from_report: Vec<String> = report["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| c["checks"].as_array().unwrap().iter().map(move |k| format!("{}:{}", c["id"], k["name"].as_str().unwrap())))
        .collect();
    assert_eq!(manifest.checks, from_report);
    let mut unique = manifest.checks.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), manifest.checks.len());
    assert_eq!(manifest.seed, 5);

    let o = plap(dir.path(), &["report", "."]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("2/2 runs pass"), "{text}");
}

#[test]
fn report_needs_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = plap(dir.path(), &["report", "."]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains(MANIFEST_FILE));
}

#[test]
fn calibration_is_reproducible_and_reusable() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["c1", "c2"] {
        assert_eq!(code(&plap(dir.path(), &["calibrate", "--out", out, "--threads", "2"])), 0);
    }
    let lock = fs::read(dir.path().join("c1").join(CONSTANTS_FILE)).unwrap();
    assert_eq!(lock, fs::read(dir.path().join("c2").join(CONSTANTS_FILE)).unwrap());

    fs::write(dir.path().join("empty.toml"), "[flux]\np = []\n").unwrap();
    let o = plap(dir.path(), &["calibrate", "--config", "empty.toml", "--out", "c3"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty corpus"));

    fs::write(dir.path().join("frozen.toml"), "constants = \"c1/constants.lock\"\n").unwrap();
    let o = plap(dir.path(), &["verify", "corollaries", "--config", "frozen.toml", "--out", "cor"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.path().join("cor").join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest.constants, "c1/constants.lock");
}

#[test]
fn solve_writes_readable_fields() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "[grid]\ndims = [1]\n[flux]\np = [2.0]\n").unwrap();
    assert_eq!(code(&plap(dir.path(), &["solve", "--config", "s.toml", "--out", "s"])), 0);
    let field = plap::mesh::read_grid_function(&dir.path().join("s/fields/heat_p2_n1.field")).unwrap();
    assert_eq!(field.grid().space().dim(), 1);
    assert!(field.values().iter().all(|v| v.is_finite()));
    assert!(fs::read_to_string(dir.path().join("s/convergence.csv")).unwrap().starts_with("case,h,error,order"));
}
