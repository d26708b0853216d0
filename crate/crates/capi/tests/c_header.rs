//! Compiles and runs a small C program against the generated header and
//! the cdylib, proving the ABI end to end. Skips when no C compiler is on
//! the PATH.

use std::path::PathBuf;
use std::process::Command;

const C_SMOKE: &str = r#"
#include <stdio.h>
#include <string.h>
#include "equicut.h"

int main(void) {
    if (strlen(eq_version()) == 0) return 10;

    EqInstance *inst = NULL;
    if (eq_instance_generate(2, 2, 1, 1000, &inst) != EQ_STATUS_OK) return 11;
    if (eq_instance_players(inst) != 2 || eq_instance_markets(inst) != 2) return 12;

    EqReport *report = NULL;
    if (eq_solve(inst, 0.01, 100, 1000000, &report) != EQ_STATUS_OK) return 13;
    if (eq_report_delta_upper(report) > 0.01) return 14;

    size_t len = eq_report_point_len(report);
    if (len != 4) return 15;
    double point[4];
    if (eq_report_point(report, point, len) != EQ_STATUS_OK) return 16;

    int is_eq = -1;
    if (eq_verify_gne(inst, point, len, 1e-6, 1000000, &is_eq) != EQ_STATUS_OK) return 17;
    if (is_eq != 1) return 18;

    char msg[8];
    EqStatus s = eq_instance_generate(0, 2, 0, 1000, NULL);
    if (s != EQ_STATUS_NULL_POINTER) return 19;
    if (eq_last_error_message(msg, sizeof msg) == 0) return 20;

    eq_report_free(report);
    eq_instance_free(inst);
    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let Ok(cc_probe) = Command::new("cc").arg("--version").output() else {
        eprintln!("skipping: no C compiler on PATH");
        return;
    };
    if !cc_probe.status.success() {
        eprintln!("skipping: no usable C compiler");
        return;
    }

    // target/debug, two levels up from the test executable in deps/.
    let exe = std::env::current_exe().unwrap();
    let target_debug: PathBuf = exe.parent().unwrap().parent().unwrap().to_path_buf();
    let lib = target_debug.join("libequicut_capi.so");
    assert!(lib.is_file(), "cdylib missing at {}", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, C_SMOKE).unwrap();

    let compile = Command::new("cc")
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&target_debug)
        .args(["-lequicut_capi", "-lm"])
        .output()
        .unwrap();
    assert!(
        compile.status.success(),
        "compilation failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&bin)
        .env("LD_LIBRARY_PATH", &target_debug)
        .output()
        .unwrap();
    assert_eq!(
        run.status.code(),
        Some(0),
        "smoke binary failed: {}\n{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
