//! The `tpop` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tpop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpop"))
        .args(args)
        .output()
        .expect("tpop binary runs")
}

fn scenario() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios/worked_example.json")
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_tree_exit_codes() {
    let half = tpop(&["verify-tree", &scenario()]);
    assert_eq!(half.status.code(), Some(0), "{}", stderr(&half));
    assert!(stdout(&half).contains("truthful"));
    assert!(stdout(&half).contains("eliminated: [2]"));

    let full = tpop(&["verify-tree", &scenario(), "--threshold", "1"]);
    assert_eq!(full.status.code(), Some(1));
    assert!(stdout(&full).contains("untruthful"));
    assert!(stdout(&full).contains("stopped at level 2"));

    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario()).unwrap();
    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    let broken = tpop(&["verify-tree", truncated.to_str().unwrap()]);
    assert_eq!(broken.status.code(), Some(2));
    assert!(
        stderr(&broken).contains("malformed tree input"),
        "{}",
        stderr(&broken)
    );

    let missing = tpop(&["verify-tree", "/nonexistent/tree.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn verify_tree_shape_mismatch_is_an_input_error() {
    let out = tpop(&["verify-tree", &scenario(), "--witnesses", "6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("depth"), "{}", stderr(&out));
}

#[test]
fn verify_tree_with_separate_confirmations() {
    let dir = tempfile::tempdir().unwrap();
    let bundle: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(scenario()).unwrap()).unwrap();
    let tree = dir.path().join("tree.json");
    fs::write(&tree, bundle["tree"].to_string()).unwrap();
    let mut answers = bundle["confirmations"].clone();
    for a in answers.as_array_mut().unwrap() {
        a["confirms"] = true.into();
    }
    let conf = dir.path().join("confirmations.json");
    fs::write(&conf, answers.to_string()).unwrap();
    let args = [
        "verify-tree",
        tree.to_str().unwrap(),
        "--confirmations",
        conf.to_str().unwrap(),
        "--threshold",
        "1",
        "--witnesses",
        "2,2",
    ];
    let out = tpop(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn model_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = tpop(&["model", "--grid-step", "0.5", "--trees", "10", "--out", d]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["r_model", "s_model"] {
        let csv = fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "p_h,p_c,value,count,low_confidence");
        assert_eq!(lines.len(), 10);
        assert!(!csv.contains('\r'));
        let svg = fs::read_to_string(dir.path().join(format!("{name}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}

#[test]
fn validating_a_model_against_itself_gives_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(
        tpop(&["model", "--grid-step", "0.1", "--trees", "200", "--out", d])
            .status
            .success()
    );
    for k in ["r", "s"] {
        fs::copy(
            dir.path().join(format!("{k}_model.csv")),
            dir.path().join(format!("{k}_sim.csv")),
        )
        .unwrap();
    }
    let out = tpop(&["validate", "--out", d]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("jsd_report.json")).unwrap())
            .unwrap();
    let reports = report.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert_eq!(r["global"], 0.0);
        assert_eq!(r["theta_label"], "flat");
        assert!(dir
            .path()
            .join(r["pointwise_csv_path"].as_str().unwrap())
            .exists());
    }
}

#[test]
fn validate_rejects_mismatched_grids() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(tpop(&[
        "model",
        "--grid-step",
        "0.5",
        "--trees",
        "10",
        "--out",
        a.to_str().unwrap()
    ])
    .status
    .success());
    assert!(tpop(&[
        "model",
        "--grid-step",
        "0.25",
        "--trees",
        "10",
        "--out",
        b.to_str().unwrap()
    ])
    .status
    .success());
    for k in ["r", "s"] {
        fs::copy(
            b.join(format!("{k}_model.csv")),
            a.join(format!("{k}_sim.csv")),
        )
        .unwrap();
    }
    let out = tpop(&["validate", "--out", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sim_writes_maps_and_per_run_records() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, "grid_step = 0.5\nsim_runs_per_cell = 2\n[world]\nn_agents = 300\ntarget_avg_neighbors = 30.0\n").unwrap();
    let out = tpop(&[
        "sim",
        "--config",
        config.to_str().unwrap(),
        "--theta",
        "deep",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("r_sim.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    // all-honest corner: everyone is accepted
    assert!(csv.lines().any(|l| l.starts_with("1.0,0.0,1.0,")), "{csv}");
    let runs = fs::read_to_string(dir.path().join("sim_runs.jsonl")).unwrap();
    assert_eq!(runs.lines().count(), 18);
    for line in runs.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let total: u64 = [
            "honest_accepted",
            "honest_rejected",
            "dishonest_accepted",
            "dishonest_rejected",
        ]
        .iter()
        .map(|k| v[k].as_u64().unwrap())
        .sum();
        assert_eq!(total, 300);
    }
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "grid_step = 0.1\n\n[world]\nn_agents = \"many\"\n").unwrap();
    let out = tpop(&[
        "model",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
}

#[test]
fn invalid_flags_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(
        tpop(&["model", "--grid-step", "0.3", "--out", d])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tpop(&["model", "--jobs", "0", "--out", d]).status.code(),
        Some(2)
    );
}
