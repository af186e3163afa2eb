//! City-level daily radiance from per-pixel observations.
//!
//! Fill pixels are masked, the remaining raw values are multiplied by the
//! scale factor, and the city value is the area-weighted mean over the
//! retained pixels. Poor-quality pixels are retained and counted.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Table;
use crate::types::NtlDaily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    GoodQuality,
    GapFilled,
    PoorQuality,
}

impl std::str::FromStr for QualityFlag {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "good_quality" | "0" => Ok(Self::GoodQuality),
            "gap_filled" | "2" => Ok(Self::GapFilled),
            "poor_quality" | "1" => Ok(Self::PoorQuality),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelObservation {
    pub pixel_id: String,
    pub date: NaiveDate,
    pub raw_radiance: f64,
    /// km²
    pub area: f64,
    pub quality_flag: QualityFlag,
    pub is_fill: bool,
}

fn valid(pixels: &[PixelObservation]) -> impl Iterator<Item = &PixelObservation> {
    pixels.iter().filter(|p| !p.is_fill)
}

fn date_of(pixels: &[PixelObservation]) -> NaiveDate {
    pixels.first().map(|p| p.date).unwrap_or_default()
}

/// Share of non-fill pixels flagged as gap-filled.
pub fn gap_filled_fraction(pixels: &[PixelObservation]) -> Result<f64> {
    let (mut total, mut filled) = (0usize, 0usize);
    for p in valid(pixels) {
        total += 1;
        if p.quality_flag == QualityFlag::GapFilled {
            filled += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoValidPixels(date_of(pixels)));
    }
    Ok(filled as f64 / total as f64)
}

/// Area-weighted radiance for one date.
pub fn aggregate_daily(pixels: &[PixelObservation], scale_factor: f64) -> Result<NtlDaily> {
    if !(scale_factor > 0.0 && scale_factor.is_finite()) {
        return Err(Error::Argument(format!("scale_factor must be positive, got {scale_factor}")));
    }
    let date = date_of(pixels);
    if let Some(p) = pixels.iter().find(|p| p.date != date) {
        return Err(Error::Validation(format!(
            "pixel {} dated {} in a batch for {date}",
            p.pixel_id, p.date
        )));
    }
    let (mut weighted, mut area) = (0.0, 0.0);
    for p in valid(pixels) {
        if !(p.area > 0.0) {
            return Err(Error::Validation(format!("pixel {}: area must be positive", p.pixel_id)));
        }
        weighted += p.raw_radiance * scale_factor * p.area;
        area += p.area;
    }
    if area == 0.0 {
        return Err(Error::NoValidPixels(date));
    }
    let out = NtlDaily {
        date,
        radiance: weighted / area,
        gap_fraction: gap_filled_fraction(pixels)?,
    };
    out.validate()?;
    Ok(out)
}

/// Per-date bookkeeping produced alongside the aggregated series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub dates: usize,
    pub fill_pixels: usize,
    pub poor_quality_pixels: usize,
    /// Dates whose listed pixel ids, fill rows included, differ from the
    /// first date's.
    pub inconsistent_pixel_sets: Vec<NaiveDate>,
}

/// Aggregates a flat pixel table into one record per date.
pub fn aggregate_series(pixels: &[PixelObservation], scale_factor: f64) -> Result<(Vec<NtlDaily>, AggregateReport)> {
    let mut by_date: BTreeMap<NaiveDate, Vec<PixelObservation>> = BTreeMap::new();
    for p in pixels {
        by_date.entry(p.date).or_default().push(p.clone());
    }
    let mut reference: Option<BTreeSet<&str>> = None;
    let mut report = AggregateReport {
        dates: by_date.len(),
        fill_pixels: pixels.iter().filter(|p| p.is_fill).count(),
        poor_quality_pixels: valid(pixels)
            .filter(|p| p.quality_flag == QualityFlag::PoorQuality)
            .count(),
        inconsistent_pixel_sets: Vec::new(),
    };
    let mut out = Vec::with_capacity(by_date.len());
    for (date, group) in &by_date {
        let ids: BTreeSet<&str> = group.iter().map(|p| p.pixel_id.as_str()).collect();
        match &reference {
            None => reference = Some(ids),
            Some(r) if *r != ids => {
                log::warn!("pixel sample on {date} differs from the first date's");
                report.inconsistent_pixel_sets.push(*date);
            }
            Some(_) => {}
        }
        out.push(aggregate_daily(group, scale_factor)?);
    }
    Ok((out, report))
}

pub fn load_pixel_csv(path: impl AsRef<Path>) -> Result<Vec<PixelObservation>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pixel_csv(file)
}

pub fn read_pixel_csv<R: Read>(reader: R) -> Result<Vec<PixelObservation>> {
    let mut table = Table::new(reader)?;
    let id = table.require("pixel_id")?;
    let date = table.require("date")?;
    let raw = table.require("raw_radiance")?;
    let area = table.require("area")?;
    let flag = table.require("quality_flag")?;
    let fill = table.require("is_fill")?;
    let mut out = Vec::new();
    while let Some(row) = table.next_row()? {
        let missing = |c: &str| Error::Validation(format!("line {}: missing value in `{c}`", row.line()));
        let pixel_id = row.raw(id.0).ok_or_else(|| missing("pixel_id"))?.to_owned();
        let d = row.date(&date)?.ok_or_else(|| missing("date"))?;
        let is_fill = match row.raw(fill.0).ok_or_else(|| missing("is_fill"))? {
            "1" | "true" | "TRUE" | "True" => true,
            "0" | "false" | "FALSE" | "False" => false,
            other => return Err(row.parse_error("is_fill", other)),
        };
        // fill pixels may carry the sensor fill value or nothing at all
        let raw_radiance = match row.number(raw.0, &raw.1)? {
            Some(v) => v,
            None if is_fill => f64::NAN,
            None => return Err(missing("raw_radiance")),
        };
        let a = row.number(area.0, &area.1)?.ok_or_else(|| missing("area"))?;
        let f = row.raw(flag.0).ok_or_else(|| missing("quality_flag"))?;
        let quality_flag = f.parse().map_err(|_| row.parse_error("quality_flag", f))?;
        out.push(PixelObservation {
            pixel_id,
            date: d,
            raw_radiance,
            area: a,
            quality_flag,
            is_fill,
        });
    }
    Ok(out)
}
