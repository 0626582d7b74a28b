#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus")
}

pub fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the binary in the corpus directory, without a default store.
pub fn protogame(args: &[&str]) -> Run {
    protogame_in(&corpus_dir(), args, None)
}

pub fn protogame_in(dir: &Path, args: &[&str], store: Option<&Path>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_protogame"));
    cmd.args(args).current_dir(dir).env_remove("PROTOGAME_STORE");
    if let Some(s) = store {
        cmd.env("PROTOGAME_STORE", s);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}
