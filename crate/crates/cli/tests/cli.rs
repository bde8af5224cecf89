//! End-to-end runs of the `ertkit` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ertkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ertkit"))
        .args(args)
        .current_dir(root())
        .env_remove("ERTKIT_MAX_NODES")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn eval_truncated_geometric() {
    let o = ertkit(&["eval", "programs/trunc.pp", "--f", "0"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("5/2 (exact)"), "{}", stdout(&o));
}

#[test]
fn eval_reads_states_and_corpus_names() {
    let o = ertkit(&["eval", "programs/halfway.pp", "--f", "x", "--state", "x=1"]);
    assert!(stdout(&o).contains("6 (exact)"), "{}", stdout(&o));
    let o = ertkit(&["eval", "corpus:geo", "--loops", "solve", "--state", "c=1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("5 (exact)"), "{}", stdout(&o));
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(code(&ertkit(&["eval", "no/such/file.pp"])), 2);
    assert_eq!(code(&ertkit(&["eval", "programs/trunc.pp", "--f", "1 +"])), 2);
    assert_eq!(code(&ertkit(&["eval", "programs/geo.pp", "--f", "0"])), 2, "unbound variable");
}

#[test]
fn node_cap_from_environment() {
    let args = ["crosscheck", "programs/geo.pp", "--f", "0", "--state", "c=1"];
    let o = Command::new(env!("CARGO_BIN_EXE_ertkit"))
        .args(args)
        .current_dir(root())
        .env("ERTKIT_MAX_NODES", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("node cap"));
    assert_eq!(code(&ertkit(&args)), 0);
}

#[test]
fn spec_files_set_exit_codes() {
    for (spec, want) in [
        ("specs/geo_upper.spec", 0),
        ("specs/geo_too_small.spec", 1),
        ("specs/coupon_inner_upper.spec", 0),
        ("specs/npast_c2_upper.spec", 0),
    ] {
        assert_eq!(code(&ertkit(&["check-inv", spec])), want, "{spec}");
    }
    assert_eq!(code(&ertkit(&["check-omega", "specs/geo_omega.spec"])), 0);
    assert_eq!(code(&ertkit(&["check-omega", "specs/rwalk_lower.spec"])), 0);
    assert_eq!(code(&ertkit(&["check-omega", "specs/geo_limit.spec"])), 3);
    assert_eq!(code(&ertkit(&["refine", "specs/geo_refine.spec"])), 0);
}

#[test]
fn crosscheck_agrees_on_demonic_program() {
    let o = ertkit(&["crosscheck", "programs/demonic.pp", "--f", "0", "--state", "c=0"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("17"));
}

#[test]
fn json_reports_are_reproducible() {
    for args in [
        &["--format", "json", "eval", "programs/trunc.pp", "--f", "0"][..],
        &["--format", "json", "props", "--seed", "7", "--count", "12"][..],
        &["--format", "json", "corpus", "trunc"][..],
    ] {
        let a = ertkit(args);
        let b = ertkit(args);
        assert_eq!(code(&a), 0, "{args:?}: {}", stdout(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
        assert_eq!(v["schema"], "ertkit-report/1");
        assert!(v.get("timings").is_none());
    }
}

#[test]
fn mutant_is_reported_as_failure() {
    let o = ertkit(&["props", "--seed", "1", "--count", "60", "--mutant"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

#[test]
fn export_mdp_formats() {
    let o = ertkit(&["export-mdp", "programs/trunc.pp"]);
    assert!(stdout(&o).starts_with("digraph"), "{}", stdout(&o));
    let o = ertkit(&["--format", "json", "export-mdp", "programs/trunc.pp"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["nodes"].as_array().is_some_and(|n| !n.is_empty()));
}
