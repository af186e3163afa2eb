//! Thresholds and heatwave-day counts over the percentile and duration grid
//! for four years of synthetic daily temperatures.
//!
//! cargo run --example detect_heatwaves -- [seed]

use heatlight::heatwave::detect;
use heatlight::synth::{brute_force_heatwave_count, generate_city, SynthCityConfig};
use heatlight::types::TemperatureColumn;

fn main() -> heatlight::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let city = generate_city(&SynthCityConfig {
        seed,
        ..SynthCityConfig::default()
    })?;
    let dates: Vec<_> = city.weather.iter().map(|w| w.date).collect();
    let temps: Vec<f64> = city.weather.iter().map(|w| w.temperature(TemperatureColumn::TempAvg)).collect();
    println!("   p  d  threshold  hot days  heatwave days  episodes  brute force");
    for p in [0.80, 0.85, 0.90] {
        for d in [2, 3, 4] {
            let (threshold, hw) = detect(&dates, &temps, p, d)?;
            println!(
                "{p:.2}  {d}  {:7.2} °C  {:8}  {:13}  {:8}  {:11}",
                threshold.tau,
                hw.hot_day.iter().filter(|&&h| h == 1).count(),
                hw.treated_days(),
                hw.onsets().len(),
                brute_force_heatwave_count(&temps, p, d)
            );
        }
    }
    Ok(())
}
