//! Acceptance run: the `selftest` subcommand twice, once on a single thread,
//! then a byte comparison of everything both runs wrote.
//!
//! Prints one line per criterion; fails if anything outside
//! `KNOWN_FAILURES` does.

use std::fs;
use std::path::Path;
use std::process::Command;

use trapdamp::acceptance::{determinism, Check};

/// Criteria that fail on the model as built; see the project notes.
const KNOWN_FAILURES: &[&str] = &["10a-l1"];

fn selftest(out: &Path, threads: Option<&str>) -> i32 {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trapdamp"));
    cmd.args(["selftest", "--out"]).arg(out);
    if let Some(t) = threads {
        cmd.env(trapdamp::cli::THREADS_ENV, t);
    }
    let status = cmd.output().expect("trapdamp runs").status;
    status.code().expect("exit code")
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("first"), tmp.path().join("second"));

    let code = selftest(&a, None);
    assert!(code == 0 || code == 3, "selftest exit {code}");
    let code_again = selftest(&b, Some("1"));
    assert_eq!(code, code_again);

    let mut checks: Vec<Check> = serde_json::from_slice(&fs::read(a.join("acceptance.json")).unwrap()).unwrap();
    checks.push(determinism(&read_dir(&a), &read_dir(&b)));

    for c in &checks {
        println!("{}", c.line());
    }
    let ids: Vec<&str> = checks.iter().map(|c| c.id.as_str()).collect();
    for id in ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10a-spacing", "10a-ratio", "10a-l1", "10b", "10c", "10d", "11"] {
        assert!(ids.contains(&id), "criterion {id} missing");
    }
    let unexpected: Vec<String> =
        checks.iter().filter(|c| !c.passed && !KNOWN_FAILURES.contains(&c.id.as_str())).map(Check::line).collect();
    assert!(unexpected.is_empty(), "failing criteria:\n{}", unexpected.join("\n"));
    let known = checks.iter().filter(|c| !c.passed).count();
    println!("acceptance: {} of {} criteria pass, {known} known failure(s)", checks.len() - known, checks.len());
}
