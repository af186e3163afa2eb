//! Weather client with a canned transport standing in for the API: the
//! first call goes to the transport and fills the cache, the second is
//! served from disk.
//!
//! cargo run --example fetch_weather

use std::cell::Cell;

use chrono::{Duration, NaiveDate};
use heatlight::weather_api::{FetchError, HttpResponse, Transport, WeatherClient};

struct Canned {
    calls: Cell<usize>,
}

impl Transport for &Canned {
    fn get(&self, url: &str) -> Result<HttpResponse, FetchError> {
        self.calls.set(self.calls.get() + 1);
        println!("GET {}", url.split('?').next().unwrap_or(url));
        let start = NaiveDate::from_ymd_opt(2019, 6, 1).expect("valid date");
        let days: Vec<_> = (0..14)
            .map(|i| {
                serde_json::json!({
                    "datetime": (start + Duration::days(i)).to_string(),
                    "tempmax": 38.0 + (i % 4) as f64, "temp": 31.0 + (i % 3) as f64,
                    "humidity": 35.0, "dew": 14.0, "cloudcover": 10.0, "precip": 0.0,
                    "windspeed": 15.0, "solarenergy": 27.0
                })
            })
            .collect();
        Ok(HttpResponse {
            status: 200,
            body: serde_json::to_vec(&serde_json::json!({ "days": days })).expect("json"),
        })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cache = tempfile::tempdir()?;
    let server = Canned { calls: Cell::new(0) };
    let client = WeatherClient::new(&server, cache.path());
    let (start, end) = (NaiveDate::from_ymd_opt(2019, 6, 1).expect("valid date"), NaiveDate::from_ymd_opt(2019, 6, 14).expect("valid date"));
    for attempt in 1..=2 {
        let rows = client.fetch_weather("Cairo", start, end, "demo-key")?;
        println!(
            "attempt {attempt}: {} days, hottest {:.1} °C, transport calls so far {}",
            rows.len(),
            rows.iter().map(|r| r.temp_max).fold(f64::MIN, f64::max),
            server.calls.get()
        );
    }
    println!("cached at {}", client.cache_path("Cairo", start, end).display());
    Ok(())
}
