//! Joins a weather series and a radiance series with gaps on either side
//! and reports what the inner join kept.
//!
//! cargo run --example ingest_join

use heatlight::ingest::join_on_date;
use heatlight::synth::{generate_city, SynthCityConfig};

fn main() -> heatlight::Result<()> {
    let city = generate_city(&SynthCityConfig {
        n_days: 120,
        ..SynthCityConfig::default()
    })?;
    // cloudy nights leave holes in radiance, station outages in weather
    let weather: Vec<_> = city.weather.iter().enumerate().filter(|(i, _)| i % 17 != 5).map(|(_, w)| w.clone()).collect();
    let ntl: Vec<_> = city.ntl.iter().enumerate().filter(|(i, _)| i % 9 != 2).map(|(_, n)| n.clone()).collect();
    let (dataset, report) = join_on_date(&weather, &ntl)?;
    let (first, last) = dataset.span();
    println!("weather rows  {}", weather.len());
    println!("radiance rows {}", ntl.len());
    println!("joined        {} days, {first} to {last}", report.retained);
    println!("dropped       {} weather-only, {} radiance-only", report.dropped_weather, report.dropped_ntl);
    let log_ntl = dataset.log_radiance();
    println!("mean log radiance {:.4}", log_ntl.iter().sum::<f64>() / log_ntl.len() as f64);
    Ok(())
}
