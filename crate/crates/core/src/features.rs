//! Confounder design matrix: climate covariates, cooling degree days,
//! lagged series and interaction terms, aligned with the treatment and the
//! log-radiance outcome.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatwave::HeatwaveSeries;
use crate::ingest::{csv_writer, flush, fmt_num, write_record, Table};
use crate::types::{CityConfig, CityDataset};

/// Series a feature spec may refer to.
pub const SERIES: [&str; 10] = [
    "cdd",
    "tempmax",
    "tempavg",
    "humidity",
    "dew",
    "cloudcover",
    "precip",
    "windspeed",
    "solarenergy",
    "heatwave",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub column: String,
    pub lags: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    /// Contemporaneous columns.
    pub base: Vec<String>,
    pub lags: Vec<LagSpec>,
    /// Pairwise products, named `a_x_b`.
    pub interactions: Vec<(String, String)>,
}

impl Default for FeatureSpec {
    /// The full confounder set: 8 climate columns, 6 lags, 3 interactions.
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self {
            base: s(&[
                "cdd",
                "tempmax",
                "humidity",
                "dew",
                "cloudcover",
                "precip",
                "windspeed",
                "solarenergy",
            ]),
            lags: vec![
                LagSpec {
                    column: "cdd".into(),
                    lags: vec![1, 2, 3],
                },
                LagSpec {
                    column: "humidity".into(),
                    lags: vec![1],
                },
                LagSpec {
                    column: "tempavg".into(),
                    lags: vec![1, 2],
                },
            ],
            interactions: vec![
                ("heatwave".into(), "humidity".into()),
                ("heatwave".into(), "solarenergy".into()),
                ("tempmax".into(), "cloudcover".into()),
            ],
        }
    }
}

impl FeatureSpec {
    pub fn without_interactions() -> Self {
        Self {
            interactions: Vec::new(),
            ..Self::default()
        }
    }

    /// Drops interactions that involve the treatment itself.
    pub fn without_treatment_interactions() -> Self {
        Self::default().drop_treatment_interactions()
    }

    /// Whether any interaction multiplies the treatment indicator, which puts
    /// a function of D among the confounders.
    pub fn has_treatment_interactions(&self) -> bool {
        self.interactions.iter().any(|(a, b)| a == "heatwave" || b == "heatwave")
    }

    pub fn drop_treatment_interactions(&self) -> Self {
        let mut spec = self.clone();
        spec.interactions.retain(|(a, b)| a != "heatwave" && b != "heatwave");
        spec
    }

    pub fn max_lag(&self) -> usize {
        self.lags.iter().flat_map(|l| l.lags.iter().copied()).max().unwrap_or(0)
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = self.base.clone();
        for l in &self.lags {
            names.extend(l.lags.iter().map(|i| lag_name(&l.column, *i)));
        }
        names.extend(self.interactions.iter().map(|(a, b)| interaction_name(a, b)));
        names
    }
}

pub fn lag_name(column: &str, lag: usize) -> String {
    format!("{column}_lag{lag}")
}

pub fn interaction_name(a: &str, b: &str) -> String {
    format!("{a}_x_{b}")
}

pub fn cooling_degree_days(temp_avg: f64, base: f64) -> f64 {
    (temp_avg - base).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaggedColumns {
    pub names: Vec<String>,
    /// `columns[k][t]` is `series[t - lags[k]]`, or `None` before the series starts.
    pub columns: Vec<Vec<Option<f64>>>,
    /// Leading rows with at least one undefined lag.
    pub trim: usize,
}

pub fn build_lags(name: &str, series: &[f64], lags: &[usize]) -> Result<LaggedColumns> {
    let mut out = LaggedColumns {
        names: Vec::with_capacity(lags.len()),
        columns: Vec::with_capacity(lags.len()),
        trim: 0,
    };
    for &lag in lags {
        if lag == 0 {
            return Err(Error::Argument(format!("{name}: lag offsets must be at least 1")));
        }
        if lag >= series.len() {
            return Err(Error::Argument(format!(
                "{name}: lag {lag} needs more than {} observations",
                series.len()
            )));
        }
        out.names.push(lag_name(name, lag));
        out.columns
            .push((0..series.len()).map(|t| t.checked_sub(lag).map(|s| series[s])).collect());
        out.trim = out.trim.max(lag);
    }
    Ok(out)
}

pub fn build_interactions(
    columns: &BTreeMap<String, Vec<f64>>,
    spec: &[(String, String)],
) -> Result<Vec<(String, Vec<f64>)>> {
    let get = |name: &String| {
        columns
            .get(name)
            .ok_or_else(|| Error::Argument(format!("unknown column `{name}`")))
    };
    spec.iter()
        .map(|(a, b)| {
            let (x, y) = (get(a)?, get(b)?);
            Ok((interaction_name(a, b), x.iter().zip(y).map(|(u, v)| u * v).collect()))
        })
        .collect()
}

/// Rows are city-days; `x` holds covariates in `column_names` order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dates: Vec<NaiveDate>,
    pub column_names: Vec<String>,
    pub x: DMatrix<f64>,
    pub d: Vec<f64>,
    pub y: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        dates: Vec<NaiveDate>,
        column_names: Vec<String>,
        x: DMatrix<f64>,
        d: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let n = dates.len();
        if x.nrows() != n || d.len() != n || y.len() != n {
            return Err(Error::Validation(format!(
                "row mismatch: {} dates, X {}x{}, D {}, Y {}",
                n,
                x.nrows(),
                x.ncols(),
                d.len(),
                y.len()
            )));
        }
        if x.ncols() != column_names.len() {
            return Err(Error::Validation(format!(
                "{} column names for {} columns",
                column_names.len(),
                x.ncols()
            )));
        }
        if x.iter().chain(&d).chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Validation("feature matrix has non-finite cells".into()));
        }
        let mut seen = dates.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != n {
            return Err(Error::Validation("feature matrix has duplicate dates".into()));
        }
        Ok(Self {
            dates,
            column_names,
            x,
            d,
            y,
        })
    }

    pub fn nrows(&self) -> usize {
        self.dates.len()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            dates: rows.iter().map(|&r| self.dates[r]).collect(),
            column_names: self.column_names.clone(),
            x: self.x.select_rows(rows),
            d: rows.iter().map(|&r| self.d[r]).collect(),
            y: rows.iter().map(|&r| self.y[r]).collect(),
        }
    }

    /// Writes `date,Y,D,<covariates...>`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = csv_writer(path)?;
        let header = ["date", "Y", "D"]
            .iter()
            .map(|s| s.to_string())
            .chain(self.column_names.iter().cloned());
        write_record(&mut out, path, header)?;
        for r in 0..self.nrows() {
            let rec = [self.dates[r].to_string(), fmt_num(self.y[r]), fmt_num(self.d[r])]
                .into_iter()
                .chain((0..self.ncols()).map(|c| fmt_num(self.x[(r, c)])));
            write_record(&mut out, path, rec)?;
        }
        flush(out, path)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut table = Table::new(reader)?;
        let date = table.require("date")?;
        let y = table.require("Y")?;
        let d = table.require("D")?;
        let covariates: Vec<(usize, String)> = table
            .headers()
            .iter()
            .enumerate()
            .filter(|(_, h)| !matches!(h.as_str(), "date" | "Y" | "D"))
            .map(|(i, h)| (i, h.clone()))
            .collect();
        let (mut dates, mut ys, mut ds, mut cells) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        while let Some(row) = table.next_row()? {
            let missing = |c: &str| Error::Validation(format!("line {}: missing value in `{c}`", row.line()));
            dates.push(row.date(&date)?.ok_or_else(|| missing("date"))?);
            ys.push(row.number(y.0, "Y")?.ok_or_else(|| missing("Y"))?);
            ds.push(row.number(d.0, "D")?.ok_or_else(|| missing("D"))?);
            for (i, name) in &covariates {
                cells.push(row.number(*i, name)?.ok_or_else(|| missing(name))?);
            }
        }
        let x = DMatrix::from_row_slice(dates.len(), covariates.len(), &cells);
        Self::new(dates, covariates.into_iter().map(|(_, n)| n).collect(), x, ds, ys)
    }
}

/// Full-length named series for one city, before lagging and trimming.
fn raw_series(dataset: &CityDataset, hw: &HeatwaveSeries, cdd_base: f64) -> BTreeMap<String, Vec<f64>> {
    let w = &dataset.weather;
    let col = |f: fn(&crate::types::DailyWeather) -> f64| w.iter().map(f).collect::<Vec<_>>();
    let mut m = BTreeMap::new();
    m.insert(
        "cdd".to_owned(),
        w.iter()
            .map(|r| r.cdd.unwrap_or_else(|| cooling_degree_days(r.temp_avg, cdd_base)))
            .collect(),
    );
    m.insert("tempmax".to_owned(), col(|r| r.temp_max));
    m.insert("tempavg".to_owned(), col(|r| r.temp_avg));
    m.insert("humidity".to_owned(), col(|r| r.humidity));
    m.insert("dew".to_owned(), col(|r| r.dew));
    m.insert("cloudcover".to_owned(), col(|r| r.cloudcover));
    m.insert("precip".to_owned(), col(|r| r.precip));
    m.insert("windspeed".to_owned(), col(|r| r.windspeed));
    m.insert("solarenergy".to_owned(), col(|r| r.solarenergy));
    m.insert("heatwave".to_owned(), hw.heatwave.iter().map(|&h| f64::from(h)).collect());
    m
}

/// Builds X, D = heatwave indicator and Y = ln(radiance). Leading rows
/// without every requested lag are dropped from all three together.
pub fn assemble_design(dataset: &CityDataset, hw: &HeatwaveSeries, config: &CityConfig) -> Result<FeatureMatrix> {
    let dates = dataset.dates();
    if hw.dates != dates {
        return Err(Error::Validation("heatwave series is not aligned with the dataset dates".into()));
    }
    if let Some(n) = dataset.ntl.iter().find(|n| !(n.radiance > 0.0)) {
        return Err(Error::Validation(format!(
            "{}: radiance must be positive, got {}",
            n.date, n.radiance
        )));
    }
    let spec = &config.feature_spec;
    let series = raw_series(dataset, hw, config.cdd_base);
    let lookup = |name: &String| {
        series
            .get(name)
            .ok_or_else(|| Error::Argument(format!("unknown column `{name}`")))
    };

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for name in &spec.base {
        columns.push((name.clone(), lookup(name)?.clone()));
    }
    let mut trim = 0;
    for lag in &spec.lags {
        let built = build_lags(&lag.column, lookup(&lag.column)?, &lag.lags)?;
        trim = trim.max(built.trim);
        for (name, col) in built.names.into_iter().zip(built.columns) {
            // undefined cells fall inside the trimmed prefix
            columns.push((name, col.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()));
        }
    }
    columns.extend(build_interactions(&series, &spec.interactions)?);

    let n = dates.len();
    if trim >= n {
        return Err(Error::InsufficientData(format!("{n} rows cannot support lag {trim}")));
    }
    let rows = n - trim;
    let x = DMatrix::from_fn(rows, columns.len(), |r, c| columns[c].1[r + trim]);
    let d = series["heatwave"][trim..].to_vec();
    let y = dataset.ntl[trim..].iter().map(|r| r.radiance.ln()).collect();
    FeatureMatrix::new(
        dates[trim..].to_vec(),
        columns.into_iter().map(|(name, _)| name).collect(),
        x,
        d,
        y,
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::heatwave;
    use crate::types::{DailyWeather, NtlDaily};
    use proptest::prelude::*;

    #[test]
    fn cdd_cases() {
        assert_eq!(cooling_degree_days(25.0, 18.0), 7.0);
        assert_eq!(cooling_degree_days(15.0, 18.0), 0.0);
        assert_eq!(cooling_degree_days(18.0, 18.0), 0.0);
    }

    #[test]
    fn single_lag() {
        let lagged = build_lags("s", &[1.0, 2.0, 3.0], &[1]).unwrap();
        assert_eq!(lagged.columns[0], vec![None, Some(1.0), Some(2.0)]);
        assert_eq!(lagged.trim, 1);
        assert_eq!(lagged.names, vec!["s_lag1"]);
    }

    #[test]
    fn lag_set_rows() {
        let series: Vec<f64> = (0..10).map(f64::from).collect();
        let lagged = build_lags("s", &series, &[1, 2, 3]).unwrap();
        let defined = (0..10).filter(|&t| lagged.columns.iter().all(|c| c[t].is_some())).count();
        assert_eq!(defined, series.len() - 3);
        assert_eq!(series.len() - lagged.trim, 7);
    }

    #[test]
    fn lag_errors() {
        assert!(matches!(build_lags("s", &[1.0, 2.0], &[0]), Err(Error::Argument(_))));
        assert!(build_lags("s", &[1.0, 2.0], &[2]).is_err());
    }

    #[test]
    fn interactions() {
        let mut cols = BTreeMap::new();
        cols.insert("heatwave".to_string(), vec![0.0, 1.0]);
        cols.insert("humidity".to_string(), vec![50.0, 60.0]);
        cols.insert("zero".to_string(), vec![0.0, 0.0]);
        let out = build_interactions(&cols, &[("heatwave".into(), "humidity".into())]).unwrap();
        assert_eq!(out[0].0, "heatwave_x_humidity");
        assert_eq!(out[0].1, vec![0.0, 60.0]);
        let out = build_interactions(&cols, &[("humidity".into(), "zero".into())]).unwrap();
        assert_eq!(out[0].1, vec![0.0, 0.0]);
        let err = build_interactions(&cols, &[("humidity".into(), "nope".into())]).unwrap_err();
        assert!(err.to_string().contains("nope"));

        let mut one = BTreeMap::new();
        one.insert("tempmax".to_string(), vec![30.0]);
        one.insert("cloudcover".to_string(), vec![50.0]);
        let out = build_interactions(&one, &[("tempmax".into(), "cloudcover".into())]).unwrap();
        assert_eq!(out[0].1, vec![1500.0]);
    }

    pub(crate) fn toy_dataset(n: usize) -> CityDataset {
        let start = NaiveDate::from_ymd_opt(2014, 1, 1).unwrap();
        let weather = (0..n)
            .map(|i| {
                let t = 20.0 + 8.0 * ((i as f64) * 0.3).sin();
                DailyWeather {
                    date: start + chrono::Duration::days(i as i64),
                    temp_max: t + 6.0,
                    temp_avg: t,
                    humidity: 50.0 + (i % 7) as f64,
                    dew: t - 5.0,
                    cloudcover: (i * 13 % 100) as f64,
                    precip: (i % 3) as f64,
                    windspeed: 10.0,
                    solarenergy: 4.0 + (i % 5) as f64 * 0.2,
                    cdd: None,
                }
            })
            .collect();
        let ntl = (0..n)
            .map(|i| NtlDaily {
                date: start + chrono::Duration::days(i as i64),
                radiance: if i == 5 { 1.0 } else { 20.0 + i as f64 * 0.1 },
                gap_fraction: 0.1,
            })
            .collect();
        CityDataset::new(weather, ntl).unwrap()
    }

    fn hw_for(ds: &CityDataset) -> HeatwaveSeries {
        heatwave::detect(&ds.dates(), &ds.temperatures(Default::default()), 0.8, 2).unwrap().1
    }

    #[test]
    fn default_design_shape() {
        let ds = toy_dataset(40);
        let hw = hw_for(&ds);
        let fm = assemble_design(&ds, &hw, &CityConfig::default()).unwrap();
        assert_eq!(fm.nrows(), 40 - 3);
        assert_eq!(fm.ncols(), 8 + 6 + 3);
        assert_eq!(fm.column_names, FeatureSpec::default().column_names());
        assert_eq!(fm.d.len(), fm.nrows());
        assert_eq!(fm.y.len(), fm.nrows());
        // row for day 5 (radiance 1.0) sits at index 2 after trimming 3
        assert_eq!(fm.y[2], 0.0);
        assert_eq!(fm.dates[0], ds.weather[3].date);
        // cdd lag3 on the first kept row equals cdd on day 0
        let c = fm.column_names.iter().position(|n| n == "cdd_lag3").unwrap();
        assert_eq!(fm.x[(0, c)], cooling_degree_days(ds.weather[0].temp_avg, 18.0));
    }

    #[test]
    fn design_without_interactions() {
        let ds = toy_dataset(40);
        let hw = hw_for(&ds);
        let cfg = CityConfig {
            feature_spec: FeatureSpec::without_interactions(),
            ..Default::default()
        };
        assert_eq!(assemble_design(&ds, &hw, &cfg).unwrap().ncols(), 14);
        let cfg = CityConfig {
            feature_spec: FeatureSpec::without_treatment_interactions(),
            ..Default::default()
        };
        assert_eq!(assemble_design(&ds, &hw, &cfg).unwrap().ncols(), 15);
    }

    #[test]
    fn misaligned_heatwave_rejected() {
        let ds = toy_dataset(40);
        let mut hw = hw_for(&ds);
        hw.dates.rotate_left(1);
        assert!(assemble_design(&ds, &hw, &CityConfig::default()).is_err());
    }

    #[test]
    fn nonpositive_radiance_rejected() {
        let mut ds = toy_dataset(40);
        let hw = hw_for(&ds);
        ds.ntl[10].radiance = 0.0;
        assert!(assemble_design(&ds, &hw, &CityConfig::default()).is_err());
    }

    #[test]
    fn csv_export_is_deterministic_and_round_trips() {
        let ds = toy_dataset(30);
        let hw = hw_for(&ds);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let fm = assemble_design(&ds, &hw, &CityConfig::default()).unwrap();
        fm.write_csv(&a).unwrap();
        assemble_design(&ds, &hw, &CityConfig::default()).unwrap().write_csv(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(FeatureMatrix::load_csv(&a).unwrap(), fm);
    }

    proptest! {
        #[test]
        fn cdd_nonnegative_monotone(t in -30.0f64..50.0, dt in 0.0f64..10.0, base in 10.0f64..25.0) {
            let a = cooling_degree_days(t, base);
            prop_assert!(a >= 0.0);
            prop_assert!(cooling_degree_days(t + dt, base) >= a);
        }

        #[test]
        fn lag_shift_recovers_series(series in prop::collection::vec(-100.0f64..100.0, 2..50), lag in 1usize..10) {
            prop_assume!(lag < series.len());
            let lagged = build_lags("s", &series, &[lag]).unwrap();
            let back: Vec<f64> = lagged.columns[0][lag..].iter().map(|v| v.unwrap()).collect();
            prop_assert_eq!(&back[..], &series[..series.len() - lag]);
        }
    }
}
