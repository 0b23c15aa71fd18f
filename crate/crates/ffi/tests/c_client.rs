//! Compiles a C program against the generated header and the shared library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "rvol.h"

int main(void) {
    RvolKernel *k = NULL;
    if (rvol_kernel_systematic(0.1, 20, 1.0, &k) != RVOL_STATUS_OK) {
        fprintf(stderr, "%s\n", rvol_last_error());
        return 1;
    }
    double g = 0.0;
    if (rvol_kernel_eval(k, 0.5, &g) != RVOL_STATUS_OK || !(g > 0.0)) return 2;

    RvolHestonParams p = { 0.02, 0.02, 0.3, 0.3, -0.7, 1.0 };
    RvolMcResult r;
    RvolStatus s = rvol_heston_price(&p, 0.1, k, "multifactor", RVOL_PAYOFF_EURO_CALL,
                                     1.0, 1.0, 10, 1.0, 1000, 3, 1, &r);
    if (s != RVOL_STATUS_OK || r.paths != 1000 || !(r.mean > 0.0)) return 3;

    if (rvol_kernel_systematic(0.9, 20, 1.0, &k) != RVOL_STATUS_INVALID_ARGUMENT) return 4;
    if (rvol_last_error() == NULL) return 5;

    rvol_kernel_free(k);
    printf("ok %s %.6f\n", rvol_version(), r.mean);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn find_cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

#[test]
fn header_declares_public_api() {
    let header =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rvol.h"))
            .unwrap();
    for sym in [
        "typedef struct RvolKernel RvolKernel;",
        "RVOL_STATUS_OK = 0",
        "rvol_kernel_systematic",
        "rvol_kernel_free",
        "rvol_heston_price",
        "rvol_last_error",
        "#ifndef RVOL_H",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = find_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let libdir = target_dir();
    assert!(
        libdir.join("librvol.so").exists(),
        "librvol.so missing in {}",
        libdir.display()
    );
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();

    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&libdir)
        .arg(format!("-Wl,-rpath,{}", libdir.display()))
        .args(["-lrvol", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");

    let out = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "exit {:?}: {stdout}",
        out.status.code()
    );
    assert!(stdout.starts_with("ok "), "{stdout}");
}
