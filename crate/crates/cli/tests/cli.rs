use std::path::Path;
use std::process::{Command, Output};

fn rumor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rumor"))
        .args(args)
        .env_remove("RUMOR_SOURCE_WORKERS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rumor(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_estimate_confset_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let scores = dir.path().join("scores.csv");
    ok(&["simulate", "--kind", "regular", "--d", "3", "--n", "500", "--seed", "42", "--out", path(&tree)]);
    ok(&["estimate", "--tree", path(&tree), "--out", path(&scores)]);
    let text = std::fs::read_to_string(&scores).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "id,log_phi,log_R,psi,dist_to_source");
    assert_eq!(lines.count(), 500);
    assert!(text.lines().nth(1).unwrap().starts_with("1,") && text.lines().nth(1).unwrap().ends_with(",0"));

    let set: serde_json::Value =
        serde_json::from_str(&ok(&["confset", "--tree", path(&tree), "--method", "psi", "--k", "7"])).unwrap();
    assert_eq!(set["method"], "psi_top_k");
    assert_eq!(set["members"].as_array().unwrap().len(), 7);
    let ball: serde_json::Value =
        serde_json::from_str(&ok(&["confset", "--tree", path(&tree), "--method", "phi", "--radius", "1"])).unwrap();
    assert!(!ball["centers"].as_array().unwrap().is_empty());

    // Same seed, same file.
    let again = dir.path().join("again.json");
    ok(&["simulate", "--d", "3", "--n", "500", "--seed", "42", "--out", path(&again)]);
    assert_eq!(std::fs::read(&tree).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn glued_tree_and_split_set() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("glued.json");
    ok(&["simulate", "--kind", "glued", "--d", "3", "--D", "6", "--n", "300", "--source-dist", "1", "--out", path(&tree)]);
    let set: serde_json::Value =
        serde_json::from_str(&ok(&["confset", "--tree", path(&tree), "--method", "glued", "--radius", "400"])).unwrap();
    assert_eq!(set["members"].as_array().unwrap().len(), 300);
    assert!(!rumor(&["simulate", "--kind", "glued", "--d", "3", "--n", "10"]).status.success());
}

#[test]
fn bound_reports() {
    let t2: serde_json::Value = serde_json::from_str(&ok(&["bound", "--formula", "t2", "--d", "10", "--ell", "8"])).unwrap();
    assert_eq!(t2["formula"], "theorem2");
    assert!((t2["raw"].as_f64().unwrap() - 0.109_039_261_151_370_08).abs() < 1e-12);
    let k: serde_json::Value = serde_json::from_str(&ok(&["bound", "--formula", "reqK", "--d", "3", "--eps", "0.9"])).unwrap();
    assert_eq!(k["value"], 18);
    let p2: serde_json::Value =
        serde_json::from_str(&ok(&["bound", "--formula", "prop2", "--d", "3", "--D", "4", "--L", "60"])).unwrap();
    assert_eq!(p2["vacuous"], true);
    assert_eq!(p2["clamped"], 1.0);
    let missing = rumor(&["bound", "--formula", "t1", "--d", "3", "--K", "10"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--eta"));
}

#[test]
fn urncheck_writes_report_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tail.csv");
    let report: serde_json::Value = serde_json::from_str(&ok(&[
        "urncheck", "--test", "tail", "--d", "3", "--trials", "2000", "--seed", "7", "--out", path(&csv),
    ]))
    .unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["sample_size"], 2000);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 2001);
    let dom: serde_json::Value = serde_json::from_str(&ok(&[
        "urncheck", "--test", "dominance", "--d", "5", "--n", "200", "--trials", "200",
    ]))
    .unwrap();
    assert_eq!(dom["statistic"], "pathwise_order");
}

#[test]
fn montecarlo_is_byte_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("campaign.json");
    std::fs::write(
        &config,
        r#"{
  "sim": {"spec": {"kind": "regular", "d": 3}, "n": 1000, "seed": 5},
  "trials": 300,
  "checkpoints": [100, 1000],
  "methods": [
    {"kind": "psi_top_k", "k": 10},
    {"kind": "phi_ball", "radius": 2},
    {"kind": "event_phi_v_leq_1", "target": {"distance": 2}}
  ]
}"#,
    )
    .unwrap();
    let mut csvs = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        let stdout = ok(&["montecarlo", "--config", path(&config), "--workers", workers, "--out", path(&out)]);
        let bytes = std::fs::read(out.join("results.csv")).unwrap();
        assert_eq!(stdout.as_bytes(), bytes.as_slice());
        assert!(out.join("results.json").exists());
        csvs.push(bytes);
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(String::from_utf8_lossy(&csvs[0]).lines().count(), 1 + 3 * 2);
}

#[test]
fn workers_env_var_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_rumor"))
        .args(["prop2", "--d", "3", "--D", "4", "--n", "200", "--L", "300", "--trials", "20"])
        .env("RUMOR_SOURCE_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("glued_union,300,200,20,0,"));
}

#[test]
fn prop1_rows_per_checkpoint() {
    let text = ok(&["prop1", "--d", "3", "--D", "6", "--trials", "30", "--checkpoints", "1,50,200"]);
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.lines().nth(1).unwrap().starts_with("bridge_phi_beats_source,,1,30,0,"));
}
