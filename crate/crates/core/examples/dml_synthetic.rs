//! Recovers a known effect from synthetic confounded data and compares it
//! with the naive regression of Y on D.
//!
//! cargo run --release --example dml_synthetic -- [n_days] [n_trees] [seed]

use std::time::Instant;

use heatlight::dml::run_dml;
use heatlight::linalg::ols;
use heatlight::nuisance::NuisanceConfig;
use heatlight::synth::{generate, SynthConfig};
use heatlight::types::CityConfig;
use nalgebra::DMatrix;

fn main() -> heatlight::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: u64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let synth = SynthConfig {
        n_days: arg(0, 2000) as usize,
        true_theta: 0.5,
        confounding_strength: 2.0,
        seed: arg(2, 1),
        ..SynthConfig::default()
    };
    let (fm, theta) = generate(&synth)?;

    let naive_x = DMatrix::from_fn(fm.nrows(), 2, |r, c| if c == 0 { 1.0 } else { fm.d[r] });
    let naive = ols(&naive_x, &fm.y)?;
    println!("true theta        {theta:.4}");
    println!("naive OLS         {:.4} (se {:.4})", naive.coef[1], naive.se[1]);

    let config = CityConfig {
        city_name: "synthetic".into(),
        seed: synth.seed,
        learners: NuisanceConfig::default().with_trees(arg(1, 500) as usize),
        ..CityConfig::default()
    };
    let start = Instant::now();
    let est = run_dml(&fm, &config)?;
    let (lo, hi) = est.confidence_interval(0.95);
    println!(
        "DML               {:.4} (se {:.4}, 95% CI [{lo:.4}, {hi:.4}], p {:.2e})",
        est.theta, est.se, est.p_value
    );
    println!("elapsed           {:.2?}", start.elapsed());
    Ok(())
}
