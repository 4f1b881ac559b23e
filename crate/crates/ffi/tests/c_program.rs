//! Compiles `tests/smoke.c` against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    let name = "libmech_lsh_ffi.a";
    [deps.parent()?.join(name), deps.join(name)]
        .into_iter()
        .find(|p| p.exists())
}

#[test]
fn c_program_links_and_runs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/mech_lsh.h");
    assert!(
        header.exists(),
        "build.rs did not write {}",
        header.display()
    );
    let lib = static_lib().expect("static library next to the test binary");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("C compiler runs");
    assert!(status.success(), "C compilation failed");
    let output = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        output.status.success(),
        "smoke failed: {stdout}{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(stdout.contains("reactions 0.5 0.5"), "{stdout}");
    assert!(stdout.contains("sensors 2 sum 1"), "{stdout}");
}
