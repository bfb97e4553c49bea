//! End-to-end runs of the `modsynth` binary against the shipped fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modsynth::result_file::load_result;
use modsynth::chain_from_urdf;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn modsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modsynth"))
        .args(args)
        .env_remove("MODSYNTH_LIBRARY")
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synth_reproduces_the_golden_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = modsynth(&["synth", arg(&fixtures().join("case1a.json")), "--seed", "7", "-q", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("feasible"));
    let golden = fixtures().join("golden/case1a_seed7");
    for name in ["result.json", "composition.json", "model.urdf", "history.csv", "torques.csv"] {
        assert_eq!(
            fs::read_to_string(dir.path().join(name)).unwrap(),
            fs::read_to_string(golden.join(name)).unwrap(),
            "{name} differs from the golden copy"
        );
    }
}

#[test]
fn check_accepts_the_golden_composition() {
    let out = modsynth(&[
        "check",
        arg(&fixtures().join("case1a.json")),
        arg(&fixtures().join("golden/case1a_seed7/composition.json")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn check_rejects_the_conventional_arm_in_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = modsynth(&[
        "check",
        arg(&fixtures().join("grid.json")),
        arg(&fixtures().join("grid_conventional.json")),
        "--out",
        arg(&report),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["verification"]["feasible"], false);
    assert!(v["verification"]["collision"].as_array().unwrap().iter().all(|c| c.as_f64().unwrap() > 0.0));
}

#[test]
fn plan_between_identical_tsls_is_a_single_waypoint() {
    let dir = tempfile::tempdir().unwrap();
    let result = fixtures().join("golden/case1a_seed7/result.json");
    let out = modsynth(&["plan", arg(&result), "--from", "1", "--to", "1", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(dir.path().join("path_torques.csv").exists());
    assert!(dir.path().join("torque_profile.svg").exists());
}

#[test]
fn plan_between_golden_tsls() {
    let dir = tempfile::tempdir().unwrap();
    let result = fixtures().join("golden/case1a_seed7/result.json");
    let out = modsynth(&["plan", arg(&result), "--from", "0", "--to", "1", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    let doc = load_result(&result).unwrap();
    let csv = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').skip(2).map(|x| x.parse().unwrap()).collect();
    assert_eq!(first, doc.ik_solutions[0]);
}

#[test]
fn plan_rejects_out_of_range_indices() {
    let result = fixtures().join("golden/case1a_seed7/result.json");
    let out = modsynth(&["plan", arg(&result), "--from", "0", "--to", "9"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn export_matches_the_synth_output() {
    let dir = tempfile::tempdir().unwrap();
    let urdf = dir.path().join("arm.urdf");
    let golden = fixtures().join("golden/case1a_seed7");
    let out = modsynth(&[
        "export",
        arg(&golden.join("composition.json")),
        "--name",
        "case1a",
        "--out",
        arg(&urdf),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&urdf).unwrap();
    assert_eq!(text, fs::read_to_string(golden.join("model.urdf")).unwrap());
    assert_eq!(chain_from_urdf(&text).unwrap().dof(), 5);
}

#[test]
fn schema_errors_exit_1_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let task = dir.path().join("task.json");
    fs::write(
        &task,
        r#"{"format_version": 1, "tsls": [{"position": [0, 0, 1]}],
            "obstacles": [{"kind": "torus", "radius": 1, "position": [0, 0, 0]}]}"#,
    )
    .unwrap();
    let out = modsynth(&["synth", arg(&task), "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("obstacles[0]") && err.contains("torus"), "{err}");
}

#[test]
fn library_prints_the_shipped_defaults() {
    let out = modsynth(&["library"]);
    assert_eq!(out.status.code(), Some(0));
    let shipped: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixtures().join("library.json")).unwrap()).unwrap();
    let printed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(printed, shipped);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(modsynth(&["synth"]).status.code(), Some(1));
    assert_eq!(modsynth(&["--help"]).status.code(), Some(0));
}
