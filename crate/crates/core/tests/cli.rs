//! End-to-end smoke tests of the command-line binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_equicut"))
}

#[test]
fn generate_then_solve_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");

    let out = bin()
        .args([
            "generate",
            "--players",
            "2",
            "--markets",
            "2",
            "--seed",
            "1",
        ])
        .args(["--out", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "generate failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(path.is_file());

    let out = bin()
        .args(["solve", path.to_str().unwrap(), "--verify"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "solve failed: {stdout}");
    assert!(
        stdout.contains("\"iteration\":1"),
        "missing trace line: {stdout}"
    );
    assert!(stdout.contains("status="));
    assert!(stdout.contains("verify_gne=true"));
}

#[test]
fn trace_example_prints_the_walkthrough() {
    let out = bin().arg("trace-example").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for needle in [
        "step 3",
        "step 4",
        "step 5",
        "step 11",
        "step 13",
        "tolerance_reached",
    ] {
        assert!(stdout.contains(needle), "missing '{needle}' in:\n{stdout}");
    }
}

#[test]
fn batch_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["batch", "--pairs", "2x2", "--instances", "3", "--seed", "5"])
        .args(["--out", dir.path().join("run").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("run/rows.csv").is_file());
    assert!(dir.path().join("run/summary.json").is_file());
    assert!(dir.path().join("run/hist_2x2.txt").is_file());
    let csv = std::fs::read_to_string(dir.path().join("run/rows.csv")).unwrap();
    assert!(csv.starts_with("pair,players,markets,seed,iterations,status,delta_u"));
}

#[test]
fn kkt_demo_reports_a_witness() {
    let out = bin().args(["kkt-demo", "--seed", "1"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("KKT-feasible point"), "{stdout}");
    assert!(stdout.contains("\"residuals\""));
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin()
        .args(["solve", "/nonexistent/file.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("equicut"));
}
