//! Writes two synthetic cities and a run file to a scratch directory, runs
//! the whole pipeline and lists the reports.
//!
//! cargo run --release --example full_pipeline -- [out_dir]

use std::path::PathBuf;

use heatlight::pipeline::{describe, run_pipeline, stage_synth, Overrides};
use heatlight::synth::{SynthCityConfig, SynthConfig};

const RUN_FILE: &str = r#"out_dir = "reports"
formats = ["csv", "json"]

[analysis]
p_grid = [0.8, 0.9]
d_grid = [2, 3, 4]

[defaults.learners.treatment]
kind = "forest"
n_trees = 50

[[cities]]
name = "riverside"
weather = "riverside/weather.csv"
ntl = "riverside/ntl.csv"

[[cities]]
name = "hillside"
weather = "hillside/weather.csv"
ntl = "hillside/ntl.csv"
settings = { percentile_p = 0.85, seed = 9 }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("heatlight_demo"));
    std::fs::create_dir_all(&root)?;
    for (name, seed, mean_temp) in [("riverside", 1, 24.0), ("hillside", 2, 19.0)] {
        let city = SynthCityConfig {
            seed,
            mean_temp,
            effect: 0.15,
            ..SynthCityConfig::default()
        };
        let design = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        stage_synth(&city, &design, &root.join(name))?;
    }
    let run_file = root.join("run.toml");
    std::fs::write(&run_file, RUN_FILE)?;

    let outcome = run_pipeline(&run_file, &Overrides::default())?;
    for (city, status) in describe(&outcome) {
        println!("{city}: {status}");
    }
    let mut files: Vec<_> = walk(&outcome.out_dir);
    files.sort();
    for f in files {
        println!("  {}", f.strip_prefix(&outcome.out_dir).unwrap_or(&f).display());
    }
    Ok(())
}

fn walk(dir: &std::path::Path) -> Vec<PathBuf> {
    std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .flat_map(|e| {
            let p = e.path();
            if p.is_dir() { walk(&p) } else { vec![p] }
        })
        .collect()
}
