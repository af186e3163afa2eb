//! Log-radiance around heatwave onsets, relative to each event's own
//! pre-onset baseline.
//!
//! Events are taken in date order. An onset is dropped when any day of its
//! window has no radiance, or when its window intersects the window of an
//! event already included.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heatwave::HeatwaveSeries;
use crate::ingest::{csv_writer, flush, fmt_num, write_record};
use crate::types::CityDataset;

/// Offsets `-pre..=post` around onset day 0. The negative offsets form the
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EventWindow {
    pub pre: i64,
    pub post: i64,
}

impl Default for EventWindow {
    fn default() -> Self {
        Self { pre: 2, post: 5 }
    }
}

impl EventWindow {
    pub fn offsets(&self) -> Vec<i64> {
        (-self.pre..=self.post).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStudyResult {
    pub offsets: Vec<i64>,
    pub effect: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub n_events: usize,
    pub onsets: Vec<NaiveDate>,
    pub excluded_incomplete: usize,
    pub excluded_overlap: usize,
}

impl EventStudyResult {
    /// `offset,effect,ci_low,ci_high,n_events`
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = csv_writer(path)?;
        write_record(&mut out, path, ["offset", "effect", "ci_low", "ci_high", "n_events"])?;
        for (i, o) in self.offsets.iter().enumerate() {
            write_record(
                &mut out,
                path,
                [
                    o.to_string(),
                    fmt_num(self.effect[i]),
                    fmt_num(self.ci_low[i]),
                    fmt_num(self.ci_high[i]),
                    self.n_events.to_string(),
                ],
            )?;
        }
        flush(out, path)
    }
}

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

pub fn event_study(dataset: &CityDataset, hw: &HeatwaveSeries, window: EventWindow) -> Result<EventStudyResult> {
    if window.pre < 1 || window.post < 0 {
        return Err(Error::Argument(format!(
            "event window needs at least one pre-onset day, got -{}..+{}",
            window.pre, window.post
        )));
    }
    let log_ntl: BTreeMap<NaiveDate, f64> = dataset
        .dates()
        .into_iter()
        .zip(dataset.log_radiance())
        .collect();
    let offsets = window.offsets();
    let mut paths: Vec<Vec<f64>> = Vec::new();
    let mut onsets = Vec::new();
    let mut excluded_incomplete = 0;
    let mut excluded_overlap = 0;
    let mut last_end: Option<NaiveDate> = None;
    for t in hw.onsets() {
        let onset = hw.dates[t];
        let values: Option<Vec<f64>> = offsets
            .iter()
            .map(|&o| log_ntl.get(&(onset + Duration::days(o))).copied())
            .collect();
        let Some(values) = values else {
            excluded_incomplete += 1;
            continue;
        };
        let start = onset - Duration::days(window.pre);
        if last_end.is_some_and(|end| start <= end) {
            excluded_overlap += 1;
            continue;
        }
        last_end = Some(onset + Duration::days(window.post));
        let pre = window.pre as usize;
        let baseline = values[..pre].iter().sum::<f64>() / pre as f64;
        paths.push(values.iter().map(|v| v - baseline).collect());
        onsets.push(onset);
    }
    let n = paths.len();
    if n == 0 {
        return Err(Error::InsufficientData(format!(
            "no heatwave onset with a complete window ({excluded_incomplete} incomplete, {excluded_overlap} overlapping)"
        )));
    }
    let mut effect = Vec::with_capacity(offsets.len());
    let mut ci_low = Vec::with_capacity(offsets.len());
    let mut ci_high = Vec::with_capacity(offsets.len());
    for i in 0..offsets.len() {
        let mean = paths.iter().map(|p| p[i]).sum::<f64>() / n as f64;
        let half = if n > 1 {
            let var = paths.iter().map(|p| (p[i] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z95 * (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        effect.push(mean);
        ci_low.push(mean - half);
        ci_high.push(mean + half);
    }
    Ok(EventStudyResult {
        offsets,
        effect,
        ci_low,
        ci_high,
        n_events: n,
        onsets,
        excluded_incomplete,
        excluded_overlap,
    })
}
