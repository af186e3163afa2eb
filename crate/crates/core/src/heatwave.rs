//! Percentile-threshold heatwave detection.
//!
//! A day is hot when its temperature is at or above the city's p-th
//! percentile. A heatwave day of duration `d` closes a run of at least `d`
//! consecutive hot days, looking backwards only.

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    /// °C
    pub tau: f64,
    pub percentile_p: f64,
    pub n_support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatwaveSeries {
    pub dates: Vec<NaiveDate>,
    pub hot_day: Vec<u8>,
    pub heatwave: Vec<u8>,
    pub percentile_p: f64,
    pub duration_d: usize,
}

impl HeatwaveSeries {
    pub fn treated_days(&self) -> usize {
        self.heatwave.iter().filter(|&&h| h == 1).count()
    }

    pub fn onsets(&self) -> Vec<usize> {
        episode_onsets(&self.heatwave)
    }
}

/// Empirical quantile with linear interpolation between order statistics,
/// at 1-based position `1 + p·(n−1)`.
pub fn percentile_threshold(temps: &[f64], p: f64) -> Result<Threshold> {
    if temps.is_empty() {
        return Err(Error::InsufficientData("empty temperature sample".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!("percentile must lie in (0,1), got {p}")));
    }
    if temps.iter().any(|t| !t.is_finite()) {
        return Err(Error::Validation("non-finite temperature".into()));
    }
    let mut sorted = temps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let tau = match sorted.get(lo + 1) {
        Some(&next) => sorted[lo] + frac * (next - sorted[lo]),
        None => sorted[lo],
    };
    Ok(Threshold {
        tau,
        percentile_p: p,
        n_support: sorted.len(),
    })
}

/// 1 where `temp >= tau`.
pub fn hot_day_indicator(temps: &[f64], tau: f64) -> Result<Vec<u8>> {
    if !tau.is_finite() {
        return Err(Error::Argument(format!("threshold must be finite, got {tau}")));
    }
    Ok(temps.iter().map(|&t| u8::from(t >= tau)).collect())
}

/// 1 where the trailing window of length `d` is all hot. No padding before
/// the first observation.
pub fn heatwave_indicator(hot_day: &[u8], d: usize) -> Result<Vec<u8>> {
    if d < 1 {
        return Err(Error::Argument("heatwave duration must be at least 1 day".into()));
    }
    let mut run = 0usize;
    Ok(hot_day
        .iter()
        .map(|&h| {
            run = if h == 1 { run + 1 } else { 0 };
            u8::from(run >= d)
        })
        .collect())
}

/// First day of each run of heatwave days.
pub fn episode_onsets(hw: &[u8]) -> Vec<usize> {
    (0..hw.len())
        .filter(|&t| hw[t] == 1 && (t == 0 || hw[t - 1] == 0))
        .collect()
}

/// Threshold, hot days and heatwave days for one `(p, d)` configuration.
pub fn detect(dates: &[NaiveDate], temps: &[f64], p: f64, d: usize) -> Result<(Threshold, HeatwaveSeries)> {
    if dates.len() != temps.len() {
        return Err(Error::Validation(format!(
            "{} dates for {} temperatures",
            dates.len(),
            temps.len()
        )));
    }
    let threshold = percentile_threshold(temps, p)?;
    let hot_day = hot_day_indicator(temps, threshold.tau)?;
    let heatwave = heatwave_indicator(&hot_day, d)?;
    Ok((
        threshold,
        HeatwaveSeries {
            dates: dates.to_vec(),
            hot_day,
            heatwave,
            percentile_p: p,
            duration_d: d,
        },
    ))
}
