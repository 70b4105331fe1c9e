#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(rel: &str) -> PathBuf {
    root().join("fixtures").join(rel)
}

pub fn dswig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dswig")).args(args).output().expect("spawn dswig")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 stdout")
}

/// Run and require exit code 0.
pub fn ok(args: &[&str]) -> String {
    let o = dswig(args);
    assert!(o.status.success(), "dswig {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}
