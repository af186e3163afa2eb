//! ADF unit-root tests and Granger causality in both directions for a
//! synthetic city, plus the same tests on a random walk for contrast.
//!
//! cargo run --release --example stationarity_granger

use heatlight::diagnostics::{adf_test, diagnose};
use heatlight::ingest::join_on_date;
use heatlight::synth::{generate_city, SynthCityConfig};
use heatlight::types::TemperatureColumn;

fn main() -> heatlight::Result<()> {
    let city = generate_city(&SynthCityConfig {
        effect: 0.2,
        ..SynthCityConfig::default()
    })?;
    let (dataset, _) = join_on_date(&city.weather, &city.ntl)?;
    let report = diagnose("synthetic", &dataset, TemperatureColumn::TempAvg, 7)?;
    let adf = |label: &str, r: &heatlight::diagnostics::AdfResult| {
        println!("ADF {label:<12} stat {:7.3}  p {:.4}  lags {}  nobs {}", r.statistic, r.p_value, r.lags_used, r.nobs)
    };
    adf("log radiance", &report.adf_log_ntl);
    adf("temperature", &report.adf_temperature);
    for (label, g) in [("temperature → radiance", &report.granger_temp_to_ntl), ("radiance → temperature", &report.granger_ntl_to_temp)] {
        println!("Granger {label}: F {:.3} on ({}, {}) df at lag {}, p {:.4}", g.f_statistic, g.df_num, g.df_denom, g.lag_used, g.p_value);
    }

    let walk: Vec<f64> = dataset.log_radiance().iter().scan(0.0, |acc, v| {
        *acc += v - 2.5;
        Some(*acc)
    }).collect();
    adf("random walk", &adf_test(&walk)?);
    Ok(())
}
