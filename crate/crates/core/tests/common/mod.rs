//! Helpers shared by the integration tests that drive the binary.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn heatlight(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlight"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Two synthetic cities under `dir` and a small run file pointing at them.
/// Returns the run file path.
pub fn two_city_run(dir: &Path) -> PathBuf {
    for (name, seed) in [("north", "11"), ("south", "12")] {
        let out = heatlight(&["synth", "--out", name, "--seed", seed, "--days", "730"], dir);
        assert!(out.status.success(), "synth failed: {}", stderr(&out));
    }
    let run = dir.join("run.toml");
    fs::write(
        &run,
        r#"out_dir = "reports"
formats = ["csv", "json"]

[analysis]
p_grid = [0.8, 0.9]
d_grid = [2, 3]

[defaults]
seed = 5

[defaults.learners.treatment]
kind = "forest"
n_trees = 30

[[cities]]
name = "north"
weather = "north/weather.csv"
ntl = "north/ntl.csv"

[[cities]]
name = "south"
weather = "south/weather.csv"
ntl = "south/ntl.csv"
settings = { percentile_p = 0.85 }
"#,
    )
    .unwrap();
    run
}

/// Every file under `root`, relative path and contents, sorted by path.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}
