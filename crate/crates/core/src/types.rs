//! Domain records shared across the pipeline.


use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::nuisance::NuisanceConfig;

/// One city-day of climate observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyWeather {
    pub date: NaiveDate,
    /// °C
    pub temp_max: f64,
    /// °C
    pub temp_avg: f64,
    /// percent, 0..=100
    pub humidity: f64,
    /// °C
    pub dew: f64,
    /// percent, 0..=100
    pub cloudcover: f64,
    /// mm
    pub precip: f64,
    /// km/h
    pub windspeed: f64,
    /// kWh/m²
    pub solarenergy: f64,
    /// Cooling degree days when supplied by the source; otherwise derived
    /// from `temp_avg` at feature-assembly time.
    pub cdd: Option<f64>,
}

impl DailyWeather {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tempmax", self.temp_max),
            ("tempavg", self.temp_avg),
            ("humidity", self.humidity),
            ("dew", self.dew),
            ("cloudcover", self.cloudcover),
            ("precip", self.precip),
            ("windspeed", self.windspeed),
            ("solarenergy", self.solarenergy),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{}: {name} is not finite", self.date)));
            }
        }
        let bounded = |name: &str, v: f64, lo: f64, hi: f64| {
            if v < lo || v > hi {
                Err(Error::Validation(format!("{}: {name} out of range ({v})", self.date)))
            } else {
                Ok(())
            }
        };
        bounded("humidity", self.humidity, 0.0, 100.0)?;
        bounded("cloudcover", self.cloudcover, 0.0, 100.0)?;
        bounded("precip", self.precip, 0.0, f64::INFINITY)?;
        bounded("windspeed", self.windspeed, 0.0, f64::INFINITY)?;
        bounded("solarenergy", self.solarenergy, 0.0, f64::INFINITY)?;
        if self.dew > self.temp_max {
            return Err(Error::Validation(format!(
                "{}: dew ({}) above tempmax ({})",
                self.date, self.dew, self.temp_max
            )));
        }
        if let Some(cdd) = self.cdd {
            if !(cdd >= 0.0 && cdd.is_finite()) {
                return Err(Error::Validation(format!("{}: cdd out of range ({cdd})", self.date)));
            }
        }
        Ok(())
    }

    pub fn temperature(&self, column: TemperatureColumn) -> f64 {
        match column {
            TemperatureColumn::TempAvg => self.temp_avg,
            TemperatureColumn::TempMax => self.temp_max,
        }
    }
}

/// One city-day of area-weighted nighttime-light radiance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtlDaily {
    pub date: NaiveDate,
    /// nW/cm²/sr, strictly positive.
    pub radiance: f64,
    /// Share of non-fill pixels that were gap-filled on this date.
    pub gap_fraction: f64,
}

impl NtlDaily {
    pub fn validate(&self) -> Result<()> {
        if !(self.radiance > 0.0 && self.radiance.is_finite()) {
            return Err(Error::Validation(format!(
                "{}: radiance must be positive, got {}",
                self.date, self.radiance
            )));
        }
        if !(0.0..=1.0).contains(&self.gap_fraction) {
            return Err(Error::Validation(format!(
                "{}: gap_fraction out of range ({})",
                self.date, self.gap_fraction
            )));
        }
        Ok(())
    }
}

/// Which daily temperature drives the hot-day threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureColumn {
    #[default]
    TempAvg,
    TempMax,
}

/// Per-city estimation settings. Defaults are the baseline specification:
/// 80th percentile, 3-day duration, 10 folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CityConfig {
    pub city_name: String,
    pub percentile_p: f64,
    pub duration_d: usize,
    pub cdd_base: f64,
    pub k_folds: usize,
    pub seed: u64,
    pub temperature: TemperatureColumn,
    pub feature_spec: FeatureSpec,
    pub learners: NuisanceConfig,
    /// Number of cross-fitting repetitions with different fold seeds. The
    /// reported estimate is the median over repetitions.
    pub repetitions: usize,
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            city_name: "city".into(),
            percentile_p: 0.80,
            duration_d: 3,
            cdd_base: 18.0,
            k_folds: 10,
            seed: 0,
            temperature: TemperatureColumn::TempAvg,
            feature_spec: FeatureSpec::default(),
            learners: NuisanceConfig::default(),
            repetitions: 1,
        }
    }
}

impl CityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.percentile_p > 0.0 && self.percentile_p < 1.0) {
            return Err(Error::Argument(format!(
                "percentile_p must lie in (0,1), got {}",
                self.percentile_p
            )));
        }
        if self.duration_d < 1 {
            return Err(Error::Argument("duration_d must be at least 1".into()));
        }
        if self.k_folds < 2 {
            return Err(Error::Argument(format!(
                "k_folds must be at least 2, got {}",
                self.k_folds
            )));
        }
        if self.repetitions < 1 {
            return Err(Error::Argument("repetitions must be at least 1".into()));
        }
        if !self.cdd_base.is_finite() {
            return Err(Error::Argument("cdd_base must be finite".into()));
        }
        self.learners.validate()
    }
}

/// Weather and radiance series restricted to their common dates.
#[derive(Debug, Clone, PartialEq)]
pub struct CityDataset {
    pub weather: Vec<DailyWeather>,
    pub ntl: Vec<NtlDaily>,
}

impl CityDataset {
    /// Builds a dataset from series that already share the same date list.
    pub fn new(weather: Vec<DailyWeather>, ntl: Vec<NtlDaily>) -> Result<Self> {
        if weather.len() != ntl.len() {
            return Err(Error::Validation(format!(
                "weather has {} rows but ntl has {}",
                weather.len(),
                ntl.len()
            )));
        }
        if weather.is_empty() {
            return Err(Error::NoOverlap);
        }
        for (w, n) in weather.iter().zip(&ntl) {
            if w.date != n.date {
                return Err(Error::Validation(format!(
                    "misaligned dates: weather {} vs ntl {}",
                    w.date, n.date
                )));
            }
            n.validate()?;
        }
        check_strictly_increasing(weather.iter().map(|w| w.date))?;
        Ok(Self { weather, ntl })
    }

    pub fn len(&self) -> usize {
        self.weather.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weather.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.weather.iter().map(|w| w.date).collect()
    }

    /// Inclusive first and last date.
    pub fn span(&self) -> (NaiveDate, NaiveDate) {
        (self.weather[0].date, self.weather[self.len() - 1].date)
    }

    pub fn temperatures(&self, column: TemperatureColumn) -> Vec<f64> {
        self.weather.iter().map(|w| w.temperature(column)).collect()
    }

    pub fn log_radiance(&self) -> Vec<f64> {
        self.ntl.iter().map(|n| n.radiance.ln()).collect()
    }
}

pub(crate) fn check_strictly_increasing(dates: impl Iterator<Item = NaiveDate>) -> Result<()> {
    let mut prev: Option<NaiveDate> = None;
    for d in dates {
        if let Some(p) = prev {
            if d == p {
                return Err(Error::DuplicateDate(d));
            }
            if d < p {
                return Err(Error::Validation(format!("dates out of order at {d}")));
            }
        }
        prev = Some(d);
    }
    Ok(())
}
