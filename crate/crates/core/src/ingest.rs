//! CSV ingestion and date alignment.
//!
//! Weather files carry one row per city-day with the columns
//! `date,tempmax,tempavg,humidity,dew,cloudcover,precip,windspeed,solarenergy[,cdd]`;
//! radiance files carry `date,radiance,gap_fraction`. Dates are ISO-8601.
//! Rows with an empty required cell are rejected and reported, never imputed.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{check_strictly_increasing, CityDataset, DailyWeather, NtlDaily};

/// Header names used for each weather field. Defaults to the canonical names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherSchema {
    pub date: String,
    pub temp_max: String,
    pub temp_avg: String,
    pub humidity: String,
    pub dew: String,
    pub cloudcover: String,
    pub precip: String,
    pub windspeed: String,
    pub solarenergy: String,
    pub cdd: String,
}

impl Default for WeatherSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            temp_max: "tempmax".into(),
            temp_avg: "tempavg".into(),
            humidity: "humidity".into(),
            dew: "dew".into(),
            cloudcover: "cloudcover".into(),
            precip: "precip".into(),
            windspeed: "windspeed".into(),
            solarenergy: "solarenergy".into(),
            cdd: "cdd".into(),
        }
    }
}

/// A row dropped during ingestion because a required cell was empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub rejected: Vec<RejectedRow>,
}

pub fn load_weather_csv(path: impl AsRef<Path>, schema: &WeatherSchema) -> Result<Loaded<DailyWeather>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_weather_csv(file, schema).map_err(|e| with_path(e, path))
}

pub fn read_weather_csv<R: Read>(reader: R, schema: &WeatherSchema) -> Result<Loaded<DailyWeather>> {
    let mut table = Table::new(reader)?;
    let date = table.require(&schema.date)?;
    let numeric = [
        table.require(&schema.temp_max)?,
        table.require(&schema.temp_avg)?,
        table.require(&schema.humidity)?,
        table.require(&schema.dew)?,
        table.require(&schema.cloudcover)?,
        table.require(&schema.precip)?,
        table.require(&schema.windspeed)?,
        table.require(&schema.solarenergy)?,
    ];
    let cdd = table.optional(&schema.cdd);

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    while let Some(row) = table.next_row()? {
        let Some(date) = row.date(&date)? else {
            rejected.push(row.rejection(&schema.date));
            continue;
        };
        let mut values = [0.0; 8];
        let mut missing = None;
        for (slot, &(idx, ref name)) in values.iter_mut().zip(numeric.iter()) {
            match row.number(idx, name)? {
                Some(v) => *slot = v,
                None => {
                    missing = Some(name.clone());
                    break;
                }
            }
        }
        if let Some(name) = missing {
            rejected.push(row.rejection(&name));
            continue;
        }
        let cdd = match &cdd {
            Some((idx, name)) => match row.number(*idx, name)? {
                Some(v) => Some(v),
                None => {
                    rejected.push(row.rejection(name));
                    continue;
                }
            },
            None => None,
        };
        let w = DailyWeather {
            date,
            temp_max: values[0],
            temp_avg: values[1],
            humidity: values[2],
            dew: values[3],
            cloudcover: values[4],
            precip: values[5],
            windspeed: values[6],
            solarenergy: values[7],
            cdd,
        };
        w.validate()?;
        records.push(w);
    }
    records.sort_by_key(|w| w.date);
    check_strictly_increasing(records.iter().map(|w| w.date))?;
    Ok(Loaded { records, rejected })
}

pub fn load_ntl_csv(path: impl AsRef<Path>) -> Result<Loaded<NtlDaily>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ntl_csv(file).map_err(|e| with_path(e, path))
}

pub fn read_ntl_csv<R: Read>(reader: R) -> Result<Loaded<NtlDaily>> {
    let mut table = Table::new(reader)?;
    let date = table.require("date")?;
    let radiance = table.require("radiance")?;
    let gap = table.require("gap_fraction")?;
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    while let Some(row) = table.next_row()? {
        let Some(d) = row.date(&date)? else {
            rejected.push(row.rejection("date"));
            continue;
        };
        let Some(r) = row.number(radiance.0, &radiance.1)? else {
            rejected.push(row.rejection("radiance"));
            continue;
        };
        let Some(g) = row.number(gap.0, &gap.1)? else {
            rejected.push(row.rejection("gap_fraction"));
            continue;
        };
        let rec = NtlDaily {
            date: d,
            radiance: r,
            gap_fraction: g,
        };
        rec.validate()?;
        records.push(rec);
    }
    records.sort_by_key(|n| n.date);
    check_strictly_increasing(records.iter().map(|n| n.date))?;
    Ok(Loaded { records, rejected })
}

/// Counts of dates present on one side only, dropped by [`join_on_date`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct JoinReport {
    pub retained: usize,
    pub dropped_weather: usize,
    pub dropped_ntl: usize,
}

/// Inner join of the two series on date.
pub fn join_on_date(weather: &[DailyWeather], ntl: &[NtlDaily]) -> Result<(CityDataset, JoinReport)> {
    check_strictly_increasing(weather.iter().map(|w| w.date))?;
    check_strictly_increasing(ntl.iter().map(|n| n.date))?;
    let mut w_out = Vec::new();
    let mut n_out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < weather.len() && j < ntl.len() {
        match weather[i].date.cmp(&ntl[j].date) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                w_out.push(weather[i].clone());
                n_out.push(ntl[j].clone());
                i += 1;
                j += 1;
            }
        }
    }
    if w_out.is_empty() {
        return Err(Error::NoOverlap);
    }
    let report = JoinReport {
        retained: w_out.len(),
        dropped_weather: weather.len() - w_out.len(),
        dropped_ntl: ntl.len() - n_out.len(),
    };
    Ok((CityDataset::new(w_out, n_out)?, report))
}

pub fn write_weather_csv(path: impl AsRef<Path>, rows: &[DailyWeather]) -> Result<()> {
    let path = path.as_ref();
    let mut out = csv_writer(path)?;
    let with_cdd = rows.iter().all(|r| r.cdd.is_some()) && !rows.is_empty();
    let mut header = vec![
        "date", "tempmax", "tempavg", "humidity", "dew", "cloudcover", "precip", "windspeed", "solarenergy",
    ];
    if with_cdd {
        header.push("cdd");
    }
    write_record(&mut out, path, header.iter().map(|s| s.to_string()))?;
    for r in rows {
        let mut rec = vec![
            r.date.to_string(),
            fmt_num(r.temp_max),
            fmt_num(r.temp_avg),
            fmt_num(r.humidity),
            fmt_num(r.dew),
            fmt_num(r.cloudcover),
            fmt_num(r.precip),
            fmt_num(r.windspeed),
            fmt_num(r.solarenergy),
        ];
        if with_cdd {
            rec.push(fmt_num(r.cdd.unwrap_or_default()));
        }
        write_record(&mut out, path, rec)?;
    }
    flush(out, path)
}

pub fn write_ntl_csv(path: impl AsRef<Path>, rows: &[NtlDaily]) -> Result<()> {
    let path = path.as_ref();
    let mut out = csv_writer(path)?;
    write_record(&mut out, path, ["date", "radiance", "gap_fraction"].map(String::from))?;
    for r in rows {
        write_record(
            &mut out,
            path,
            [r.date.to_string(), fmt_num(r.radiance), fmt_num(r.gap_fraction)],
        )?;
    }
    flush(out, path)
}

/// Shortest representation that round-trips exactly.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

pub(crate) fn write_record<I, S>(out: &mut csv::Writer<std::fs::File>, path: &Path, rec: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    out.write_record(rec).map_err(|e| csv_err(path, e))
}

pub(crate) fn flush(mut out: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Csv { message, .. } => Error::Csv {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    }
}

/// Thin wrapper over a headed CSV reader that tracks line numbers.
pub(crate) struct Table<R: Read> {
    reader: csv::Reader<R>,
    headers: Vec<String>,
}

pub(crate) struct Row {
    record: csv::StringRecord,
    line: u64,
}

impl<R: Read> Table<R> {
    pub(crate) fn new(reader: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(reader);
        let headers = reader
            .headers()
            .map_err(|e| Error::Csv {
                path: Default::default(),
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_owned)
            .collect();
        Ok(Self { reader, headers })
    }

    pub(crate) fn headers(&self) -> &[String] {
        &self.headers
    }

    pub(crate) fn require(&self, name: &str) -> Result<(usize, String)> {
        self.optional(name).ok_or_else(|| Error::MissingColumn {
            column: name.to_owned(),
        })
    }

    pub(crate) fn optional(&self, name: &str) -> Option<(usize, String)> {
        self.headers.iter().position(|h| h == name).map(|i| (i, name.to_owned()))
    }

    pub(crate) fn next_row(&mut self) -> Result<Option<Row>> {
        let mut record = csv::StringRecord::new();
        match self.reader.read_record(&mut record) {
            Ok(false) => Ok(None),
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                Ok(Some(Row { record, line }))
            }
            Err(e) => Err(Error::Csv {
                path: Default::default(),
                message: e.to_string(),
            }),
        }
    }
}

impl Row {
    pub(crate) fn line(&self) -> u64 {
        self.line
    }

    fn cell(&self, idx: usize) -> Option<&str> {
        match self.record.get(idx) {
            None | Some("") | Some("NA") => None,
            Some(s) => Some(s),
        }
    }

    pub(crate) fn raw(&self, idx: usize) -> Option<&str> {
        self.cell(idx)
    }

    pub(crate) fn number(&self, idx: usize, column: &str) -> Result<Option<f64>> {
        match self.cell(idx) {
            None => Ok(None),
            Some(s) => s.parse::<f64>().map(Some).map_err(|_| self.parse_error(column, s)),
        }
    }

    pub(crate) fn date(&self, (idx, column): &(usize, String)) -> Result<Option<NaiveDate>> {
        match self.cell(*idx) {
            None => Ok(None),
            Some(s) => NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map(Some)
                .map_err(|_| self.parse_error(column, s)),
        }
    }

    pub(crate) fn parse_error(&self, column: &str, value: &str) -> Error {
        Error::Parse {
            line: self.line,
            column: column.to_owned(),
            value: value.to_owned(),
        }
    }

    pub(crate) fn rejection(&self, column: &str) -> RejectedRow {
        RejectedRow {
            line: self.line,
            reason: format!("missing value in `{column}`"),
        }
    }
}

/// Exact set intersection of two date lists. Used as a cross-check on
/// [`join_on_date`] and by callers that only need the shared dates.
pub fn common_dates(a: &[NaiveDate], b: &[NaiveDate]) -> Vec<NaiveDate> {
    let a: BTreeSet<_> = a.iter().collect();
    b.iter().filter(|d| a.contains(d)).copied().collect::<BTreeSet<_>>().into_iter().collect()
}
