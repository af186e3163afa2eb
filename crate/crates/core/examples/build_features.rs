//! Builds the confounder design matrix from a synthetic city, with and
//! without the interactions that involve the heatwave indicator.
//!
//! cargo run --example build_features

use heatlight::features::{assemble_design, FeatureSpec};
use heatlight::heatwave::detect;
use heatlight::ingest::join_on_date;
use heatlight::synth::{generate_city, SynthCityConfig};
use heatlight::types::CityConfig;

fn main() -> heatlight::Result<()> {
    let city = generate_city(&SynthCityConfig::default())?;
    let (dataset, _) = join_on_date(&city.weather, &city.ntl)?;
    let base = CityConfig::default();
    let (_, hw) = detect(&dataset.dates(), &dataset.temperatures(base.temperature), base.percentile_p, base.duration_d)?;

    for (label, spec) in [
        ("full", FeatureSpec::default()),
        ("without treatment interactions", FeatureSpec::without_treatment_interactions()),
        ("without interactions", FeatureSpec::without_interactions()),
    ] {
        let config = CityConfig {
            feature_spec: spec,
            ..base.clone()
        };
        let fm = assemble_design(&dataset, &hw, &config)?;
        println!("{label}: {} rows × {} covariates, first date {}", fm.nrows(), fm.ncols(), fm.dates[0]);
        println!("  {}", fm.column_names.join(", "));
    }
    let treated = hw.treated_days();
    println!("{treated} heatwave days out of {}", dataset.len());
    Ok(())
}
