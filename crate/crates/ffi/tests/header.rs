//! Compiles a C program against the generated header and the static
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "helical_lab.h"

int main(void) {
    HlCurve *c = NULL;
    if (hl_curve_moment(3, &c) != HL_STATUS_OK) return 1;
    double basis[9];
    if (hl_curve_frenet(c, 0.25, basis, 9, NULL, 0) != HL_STATUS_OK) return 2;
    for (int i = 0; i < 3; i++) {
        double n = 0.0;
        for (int a = 0; a < 3; a++) n += basis[3 * i + a] * basis[3 * i + a];
        if (fabs(n - 1.0) > 1e-12) return 3;
    }
    double xi[3] = {-0.02, 0.01, 1.0};
    HlRoots r;
    if (hl_roots(c, xi, &r) != HL_STATUS_OK || r.root_count != 2) return 4;
    if (hl_curve_moment(3, NULL) != HL_STATUS_NULL_POINTER) return 5;
    char msg[128];
    if (hl_last_error_message(msg, sizeof msg) == 0) return 6;
    hl_curve_free(c);
    printf("ok %s\n", hl_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let lib = target_dir().join("libhelical_lab_ffi.a");
    if !lib.exists() {
        panic!("static library missing at {}", lib.display());
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("probe");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
