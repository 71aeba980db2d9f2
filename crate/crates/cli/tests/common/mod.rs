#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn ftlearn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftlearn"))
        .args(args)
        .current_dir(dir)
        .env_remove("FTLEARN_THREADS")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Generates `data.csv` and `data.schema.toml` in `dir` from the OR fixture.
pub fn generate_or(dir: &Path, seed: u64) {
    let gt = fixture("or_ab.json");
    let o = ftlearn(dir, &["generate", gt.to_str().unwrap(), "--seed", &seed.to_string(), "--out", "data.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

/// Appends a failure column computed from each row's existing cells.
pub fn add_failure(dir: &Path, name: &str, value: impl Fn(usize, &str) -> bool) {
    let csv = dir.join("data.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        out.push_str(line);
        if i == 0 {
            out.push_str(&format!(",{name}\n"));
        } else {
            out.push_str(if value(i - 1, line) { ",1\n" } else { ",0\n" });
        }
    }
    fs::write(&csv, out).unwrap();
    let schema = dir.join("data.schema.toml");
    let text = fs::read_to_string(&schema).unwrap();
    let text = text.replacen("failure_columns = [", &format!("failure_columns = [\"{name}\", "), 1);
    fs::write(&schema, text).unwrap();
}
