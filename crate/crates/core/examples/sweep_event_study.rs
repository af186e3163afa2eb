//! Percentile × duration sweep and event study on a synthetic city whose
//! radiance rises only after three consecutive hot days.
//!
//! cargo run --release --example sweep_event_study -- [n_trees]

use heatlight::diagnostics::{event_study, sweep, EventWindow, SweepOptions};
use heatlight::features::FeatureSpec;
use heatlight::heatwave::detect;
use heatlight::ingest::join_on_date;
use heatlight::nuisance::NuisanceConfig;
use heatlight::synth::{generate_city, SynthCityConfig};
use heatlight::types::{CityConfig, TemperatureColumn};

fn main() -> heatlight::Result<()> {
    let n_trees = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let city = generate_city(&SynthCityConfig {
        effect: 0.2,
        effect_temperature: TemperatureColumn::TempMax,
        ..SynthCityConfig::default()
    })?;
    let (dataset, _) = join_on_date(&city.weather, &city.ntl)?;
    let config = CityConfig {
        temperature: TemperatureColumn::TempMax,
        feature_spec: FeatureSpec::without_treatment_interactions(),
        learners: NuisanceConfig::default().with_trees(n_trees),
        ..CityConfig::default()
    };

    let result = sweep(&dataset, &config, &SweepOptions::default())?;
    println!("   p  d  treated   theta      se      z   change");
    for (i, cell) in result.cells.iter().enumerate() {
        let mark = if result.chosen == Some(i) { "*" } else { " " };
        match &cell.estimate {
            Some(e) => println!(
                "{:.2}  {}  {:7}  {:6.3}  {:6.3}  {:5.1}  {:6.1}% {mark}",
                cell.p, cell.d, cell.treated_days, e.theta, e.se, e.z, e.pct_change
            ),
            None => println!("{:.2}  {}  {:7}  {}", cell.p, cell.d, cell.treated_days, cell.note),
        }
    }

    let (_, hw) = detect(&dataset.dates(), &dataset.temperatures(TemperatureColumn::TempMax), 0.8, 3)?;
    let es = event_study(&dataset, &hw, EventWindow::default())?;
    println!("\nevent study over {} onsets ({} overlapping, {} incomplete excluded)", es.n_events, es.excluded_overlap, es.excluded_incomplete);
    for (i, o) in es.offsets.iter().enumerate() {
        println!("  day {o:+}  {:+.3}  [{:+.3}, {:+.3}]", es.effect[i], es.ci_low[i], es.ci_high[i]);
    }
    Ok(())
}
