use std::process::Command;

use clap::Parser;
use gausshardy_cli::{emit, run_experiment, Cli, ExperimentResult, Format};
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gausshardy"))
}

fn result(args: &str) -> ExperimentResult {
    let cli =
        Cli::try_parse_from(std::iter::once("gausshardy").chain(args.split_whitespace())).unwrap();
    run_experiment(&cli).unwrap()
}

#[test]
fn json_round_trip() {
    let r = result("tree sums --kernel geometric:0.3 --depth 10");
    let bytes = emit(&r, Format::Json).unwrap();
    let back: ExperimentResult = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.experiment, "tree-sums");
}

#[test]
fn csv_header_matches_columns() {
    let r = result("isoperimetric doubling --grid 1");
    let text = String::from_utf8(emit(&r, Format::Csv).unwrap()).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "center,radius,ratio");
    assert_eq!(lines.count(), r.rows.len());
}

#[test]
fn diverge_table_schema() {
    let r = result("diverge --u 1 --r 1 --ys 4,6");
    assert_eq!(
        r.meta.columns,
        ["y", "phi", "window_phi", "ln_y", "comparator"]
    );
    assert_eq!(r.params["ys"], serde_json::json!([4.0, 6.0]));
    assert!(!r.meta.partial);
}

#[test]
fn equivalence_record() {
    let r = result("tree equivalence --q 2 --kernel geometric:0.25");
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0]["consistent"], true);
    assert_eq!(r.rows[0]["l1"], "finite-with-bound");
}

#[test]
fn invalid_parameters_exit_two() {
    for args in [
        &["diverge", "--u", "0"][..],
        &["mehler", "check", "--t", "-1"],
        &["tree", "sums", "--q", "1"],
        &["impow", "cross", "--r", "0"],
        &["mehler", "frobnicate"],
        &["hardy", "strict", "--ys", "1,x"],
    ] {
        let out = bin().args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_path_exits_one() {
    let out = bin()
        .args(["tree", "exactness", "--out", "/nonexistent-dir/x.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn convergence_failure_writes_partial_result() {
    let dir = std::env::temp_dir().join(format!("gausshardy-partial-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("partial.json");
    let out = bin()
        .args([
            "mehler", "compose", "--t", "0.05", "--nodes", "4", "--tol", "1e-15", "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let r: ExperimentResult = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert!(r.meta.partial);
    assert!(r.meta.error.is_some());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn identical_runs_identical_bytes() {
    let a = bin()
        .args(["tree", "cheeger", "--format", "csv"])
        .output()
        .unwrap();
    let b = bin()
        .args(["tree", "cheeger", "--format", "csv", "--threads", "3"])
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tree_results_round_trip(rho in 0.01f64..0.49, depth in 4usize..40) {
        let r = result(&format!("tree sums --kernel geometric:{rho} --depth {depth}"));
        let back: ExperimentResult = serde_json::from_slice(&emit(&r, Format::Json).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn csv_rows_have_declared_width(g in 0.5f64..4.0) {
        let r = result(&format!("isoperimetric doubling --grid {g}"));
        let text = String::from_utf8(emit(&r, Format::Csv).unwrap()).unwrap();
        for line in text.lines() {
            prop_assert_eq!(line.split(',').count(), r.meta.columns.len());
        }
    }
}
