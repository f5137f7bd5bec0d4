//! End-to-end tests of the `mpp` binary: exit codes, output formats, space
//! loading, and byte-identical output across worker counts.

use std::process::{Command, Output};

fn mpp(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mpp"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("MPP_THREADS", t),
        None => cmd.env_remove("MPP_THREADS"),
    };
    cmd.output().expect("binary runs")
}

#[test]
fn criterion_8_determinism_across_thread_counts() {
    let args = [
        "scan",
        "--generator",
        "random",
        "--depth",
        "5",
        "--seed",
        "13",
        "--p",
        "1.5,2",
        "--q",
        "2",
        "--rho",
        "1.5,2.5",
        "--lambda",
        "0.5,1,2",
    ];
    let one = mpp(&args, Some("1"));
    let four = mpp(&args, Some("4"));
    assert!(one.status.success() && four.status.success());
    assert!(!one.stdout.is_empty());
    assert_eq!(one.stdout, four.stdout, "scan output differs across MPP_THREADS");
    println!("criterion 8 (byte-identical scan across thread counts): PASS");
}

#[test]
fn verify_emits_json_report_array() {
    let out = mpp(
        &[
            "verify",
            "--generator",
            "rademacher",
            "--depth",
            "6",
            "--p",
            "2",
            "--q",
            "2",
            "--rho",
            "1.5",
            "--lambda",
            "1",
            "--seed",
            "7",
            "--format",
            "json",
        ],
        None,
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let reports = mpp_core::report::from_json(&text).unwrap();
    assert!(reports.len() >= 17);
    // every bounded check on generated inputs passes
    for r in &reports {
        if r.bound.is_some() {
            assert!(r.pass, "{} failed: ratio {}", r.inequality_id, r.ratio);
        }
    }
    // round trip: JSON -> reports -> JSON reproduces the document
    let again = mpp_core::report::to_json(&reports).unwrap() + "\n";
    assert_eq!(text, again);
}

#[test]
fn oracle_runs_clean() {
    let out = mpp(&["oracle", "--depth", "8", "--count", "60", "--seed", "5"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 60);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn missing_depth_is_a_config_error() {
    let dir = std::env::temp_dir().join("mpp-cli-test-config");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("nodepth.json");
    std::fs::write(&path, r#"{"generator": {"kind": "rademacher"}}"#).unwrap();
    let out = mpp(&["verify", "--config", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("depth"), "error does not name the field: {err}");
}

#[test]
fn unknown_search_target_is_a_config_error() {
    let out = mpp(
        &["search", "--target", "nonsense", "--depth", "3", "--seed", "1"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn search_trace_is_deterministic() {
    let args = [
        "search",
        "--target",
        "thm_variation",
        "--depth",
        "3",
        "--iterations",
        "25",
        "--restarts",
        "2",
        "--seed",
        "21",
    ];
    let a = mpp(&args, Some("1"));
    let b = mpp(&args, Some("3"));
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("restart,iteration,ratio,accepted\n"));
}

#[test]
fn space_documents_load_and_fail_with_paths() {
    let dir = std::env::temp_dir().join("mpp-cli-test-space");
    std::fs::create_dir_all(&dir).unwrap();

    let good = dir.join("good.json");
    std::fs::write(
        &good,
        r#"{
            "depth": 2,
            "leaf_probs": [0.25, 0.25, 0.25, 0.25],
            "level_atoms": [[[0,1,2,3]], [[0,1],[2,3]], [[0],[1],[2],[3]]],
            "processes": {
                "f": [[0.0], [1.0, -1.0], [2.0, 0.0, 0.0, -2.0]],
                "g": [[0.0], [0.5, -0.5], [1.0, 0.0, -1.0, 0.0]]
            }
        }"#,
    )
    .unwrap();
    let out = mpp(
        &["verify", "--space", good.to_str().unwrap(), "--p", "2", "--q", "2"],
        None,
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let bad = dir.join("bad.json");
    std::fs::write(
        &bad,
        r#"{
            "depth": 1,
            "leaf_probs": [0.5, 0.5],
            "level_atoms": [[[0,1]], [[0,1]]]
        }"#,
    )
    .unwrap();
    let out = mpp(&["verify", "--space", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("level_atoms/1"), "error lacks a document path: {err}");
}

#[test]
fn flags_override_config_file() {
    let dir = std::env::temp_dir().join("mpp-cli-test-override");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("base.json");
    std::fs::write(
        &path,
        r#"{"generator": {"kind": "rademacher", "depth": 3, "seed": 1}, "p": [2.0]}"#,
    )
    .unwrap();
    let base = mpp(&["verify", "--config", path.to_str().unwrap()], None);
    assert!(base.status.success());
    let overridden = mpp(
        &["verify", "--config", path.to_str().unwrap(), "--depth", "4"],
        None,
    );
    assert!(overridden.status.success());
    let base_text = String::from_utf8(base.stdout).unwrap();
    let over_text = String::from_utf8(overridden.stdout).unwrap();
    assert!(base_text.lines().nth(1).unwrap().contains(",3,"));
    assert!(over_text.lines().nth(1).unwrap().contains(",4,"));
}
