//! Optional client for a timeline-style daily weather API.
//!
//! Responses are cached verbatim on disk, keyed by location and date span,
//! so a repeated request is served offline and byte-identical. Network
//! access lives behind the [`Transport`] trait; the `fetch` cargo feature
//! provides an HTTP implementation. Without it, only cached spans resolve.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;
use thiserror::Error;

use crate::types::DailyWeather;

/// Environment variable holding the API key.
pub const CREDENTIALS_ENV: &str = "HEATLIGHT_WEATHER_API_KEY";

pub const DEFAULT_BASE_URL: &str =
    "https://weather.visualcrossing.com/VisualCrossingWebServices/rest/services/timeline";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("invalid request: {0}")]
    Argument(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("rate limited by the weather service")]
    RateLimited,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("cache {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

pub trait Transport {
    fn get(&self, url: &str) -> Result<HttpResponse, FetchError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn get(&self, url: &str) -> Result<HttpResponse, FetchError> {
        (**self).get(url)
    }
}

/// Transport for builds without network support; every cache miss fails.
pub struct Offline;

impl Transport for Offline {
    fn get(&self, _url: &str) -> Result<HttpResponse, FetchError> {
        Err(FetchError::Transport(
            "not in cache and built without the `fetch` feature".into(),
        ))
    }
}

#[cfg(feature = "fetch")]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "fetch")]
impl HttpTransport {
    pub fn new() -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| FetchError::Transport(e.to_string()))?;
        Ok(Self { client })
    }
}

#[cfg(feature = "fetch")]
impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, FetchError> {
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| FetchError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.bytes().map_err(|e| FetchError::Transport(e.to_string()))?;
        Ok(HttpResponse {
            status,
            body: body.to_vec(),
        })
    }
}

/// The transport used by the CLI: HTTP when compiled in, otherwise offline.
pub fn default_transport() -> Result<Box<dyn Transport>, FetchError> {
    #[cfg(feature = "fetch")]
    {
        Ok(Box::new(HttpTransport::new()?))
    }
    #[cfg(not(feature = "fetch"))]
    {
        Ok(Box::new(Offline))
    }
}

pub struct WeatherClient<T> {
    transport: T,
    cache_dir: PathBuf,
    base_url: String,
}

impl<T: Transport> WeatherClient<T> {
    pub fn new(transport: T, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            transport,
            cache_dir: cache_dir.into(),
            base_url: DEFAULT_BASE_URL.to_owned(),
        }
    }

    pub fn with_base_url(mut self, url: impl Into<String>) -> Self {
        self.base_url = url.into();
        self
    }

    pub fn cache_path(&self, city: &str, start: NaiveDate, end: NaiveDate) -> PathBuf {
        let slug: String = city
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect();
        self.cache_dir.join(format!("{slug}_{start}_{end}.json"))
    }

    /// Daily weather for `city` over the inclusive span `start..=end`.
    pub fn fetch_weather(
        &self,
        city: &str,
        start: NaiveDate,
        end: NaiveDate,
        credentials: &str,
    ) -> Result<Vec<DailyWeather>, FetchError> {
        if end < start {
            return Err(FetchError::Argument(format!("end {end} precedes start {start}")));
        }
        if city.trim().is_empty() {
            return Err(FetchError::Argument("empty location".into()));
        }
        let path = self.cache_path(city, start, end);
        let body = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                if credentials.trim().is_empty() {
                    return Err(FetchError::Argument("empty credentials".into()));
                }
                let body = self.request(city, start, end, credentials)?;
                // Validate before caching so a bad payload is never persisted.
                parse_timeline(&body, start, end)?;
                write_cache(&path, &body)?;
                body
            }
            Err(e) => return Err(FetchError::Cache { path, source: e }),
        };
        parse_timeline(&body, start, end)
    }

    fn request(&self, city: &str, start: NaiveDate, end: NaiveDate, key: &str) -> Result<Vec<u8>, FetchError> {
        let url = format!(
            "{}/{}/{start}/{end}?unitGroup=metric&include=days&contentType=json&elements=datetime,tempmax,temp,humidity,dew,cloudcover,precip,windspeed,solarenergy&key={}",
            self.base_url,
            percent_encode(city),
            percent_encode(key)
        );
        let resp = self.transport.get(&url)?;
        match resp.status {
            200 => Ok(resp.body),
            401 | 403 => Err(FetchError::Auth(resp.status)),
            429 => Err(FetchError::RateLimited),
            status => Err(FetchError::Http {
                status,
                body: String::from_utf8_lossy(&resp.body).chars().take(200).collect(),
            }),
        }
    }
}

fn write_cache(path: &Path, body: &[u8]) -> Result<(), FetchError> {
    let err = |source| FetchError::Cache {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let tmp = path.with_extension("json.partial");
    std::fs::write(&tmp, body).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-_.~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

#[derive(Deserialize)]
struct Timeline {
    days: Vec<TimelineDay>,
}

#[derive(Deserialize)]
struct TimelineDay {
    datetime: String,
    tempmax: Option<f64>,
    temp: Option<f64>,
    humidity: Option<f64>,
    dew: Option<f64>,
    cloudcover: Option<f64>,
    precip: Option<f64>,
    windspeed: Option<f64>,
    solarenergy: Option<f64>,
}

/// Parses a timeline payload and checks that it covers exactly
/// `start..=end` with one record per calendar day.
pub fn parse_timeline(body: &[u8], start: NaiveDate, end: NaiveDate) -> Result<Vec<DailyWeather>, FetchError> {
    let timeline: Timeline = serde_json::from_slice(body).map_err(|e| FetchError::Malformed(e.to_string()))?;
    let mut out = Vec::with_capacity(timeline.days.len());
    let mut expected = start;
    for day in timeline.days {
        let date = NaiveDate::parse_from_str(&day.datetime, "%Y-%m-%d")
            .map_err(|_| FetchError::Malformed(format!("bad datetime `{}`", day.datetime)))?;
        if date != expected {
            return Err(FetchError::Malformed(format!("expected {expected}, found {date}")));
        }
        let field = |name: &str, v: Option<f64>| {
            v.filter(|x| x.is_finite())
                .ok_or_else(|| FetchError::Malformed(format!("{date}: missing {name}")))
        };
        let rec = DailyWeather {
            date,
            temp_max: field("tempmax", day.tempmax)?,
            temp_avg: field("temp", day.temp)?,
            humidity: field("humidity", day.humidity)?,
            dew: field("dew", day.dew)?,
            cloudcover: field("cloudcover", day.cloudcover)?,
            precip: field("precip", day.precip)?,
            windspeed: field("windspeed", day.windspeed)?,
            solarenergy: field("solarenergy", day.solarenergy)?,
            cdd: None,
        };
        rec.validate().map_err(|e| FetchError::Malformed(e.to_string()))?;
        out.push(rec);
        expected = expected.succ_opt().expect("date overflow");
    }
    if out.is_empty() || out.last().map(|r| r.date) != Some(end) {
        return Err(FetchError::Malformed(format!(
            "payload covers {} days, span {start}..={end} needs {}",
            out.len(),
            (end - start).num_days() + 1
        )));
    }
    Ok(out)
}
