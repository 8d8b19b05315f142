use std::path::PathBuf;
use std::process::Command;

fn has_cc() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/lexseq.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "lexseq_pool_train",
        "lexseq_wm_run",
        "lexseq_lmm_fit",
        "LEXSEQ_STATUS_FORMAT_ERROR",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    if !has_cc() {
        eprintln!("no C compiler, skipping link check");
        return;
    }
    // `cargo test` builds only the rlib; refresh the static library
    let built = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "--lib", "-p", "lexseq-ffi"])
        .status()
        .unwrap();
    assert!(built.success());
    // tests run from target/debug/deps
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("liblexseq_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("experts=3"), "{stdout}");
    assert!(stdout.contains("status=2 msg=invalid argument"), "{stdout}");
}
