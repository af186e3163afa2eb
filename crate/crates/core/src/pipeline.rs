//! Batch runs driven by a TOML run file, and the single-stage operations
//! behind the command-line subcommands.
//!
//! A run file lists cities with their input files. Settings in `[defaults]`
//! apply to every city and a city's `settings` table overrides them key by
//! key:
//!
//! ```toml
//! out_dir = "reports"
//! formats = ["csv", "json"]
//!
//! [defaults]
//! percentile_p = 0.80
//! duration_d = 3
//!
//! [analysis]
//! p_grid = [0.80, 0.85, 0.90]
//! d_grid = [2, 3, 4]
//!
//! [[cities]]
//! name = "cairo"
//! weather = "data/cairo_weather.csv"
//! ntl = "data/cairo_ntl.csv"
//! settings = { percentile_p = 0.80, seed = 7 }
//! ```
//!
//! Relative paths resolve against the run file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{self, event_study, sweep, EventWindow, Selection, SweepOptions};
use crate::dml::{run_dml, DmlEstimate};
use crate::error::{Error, Result};
use crate::features::{assemble_design, FeatureMatrix};
use crate::heatwave::{detect, HeatwaveSeries, Threshold};
use crate::ingest::{
    self, csv_err, csv_writer, flush, fmt_num, join_on_date, write_record, JoinReport, WeatherSchema,
};
use crate::ntl::{self, AggregateReport};
use crate::synth::{generate, generate_city, SynthCityConfig, SynthConfig};
use crate::types::{CityConfig, CityDataset, DailyWeather, NtlDaily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where a city's radiance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum NtlSource {
    Daily(PathBuf),
    Pixels { path: PathBuf, scale_factor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityInput {
    pub config: CityConfig,
    pub weather: PathBuf,
    pub ntl: NtlSource,
    pub schema: WeatherSchema,
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub p_grid: Vec<f64>,
    pub d_grid: Vec<usize>,
    pub sweep: bool,
    pub event_study: bool,
    pub diagnostics: bool,
    pub granger_max_lag: usize,
    /// Sweep cells with fewer heatwave days are flagged, not estimated.
    pub min_treated: usize,
    pub selection: Selection,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        let sweep = SweepOptions::default();
        Self {
            p_grid: sweep.p_grid,
            d_grid: sweep.d_grid,
            sweep: true,
            event_study: true,
            diagnostics: true,
            granger_max_lag: 7,
            min_treated: sweep.min_treated,
            selection: sweep.selection,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cities: Vec<CityInput>,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub jobs: Option<usize>,
    pub analysis: AnalysisOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    out_dir: Option<PathBuf>,
    jobs: Option<usize>,
    formats: Option<Vec<Format>>,
    #[serde(default)]
    analysis: AnalysisOptions,
    #[serde(default)]
    defaults: toml::Table,
    #[serde(default)]
    cities: Vec<CityEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CityEntry {
    name: String,
    weather: PathBuf,
    ntl: Option<PathBuf>,
    pixels: Option<PathBuf>,
    scale_factor: Option<f64>,
    #[serde(default)]
    schema: WeatherSchema,
    selection: Option<Selection>,
    #[serde(default)]
    settings: toml::Table,
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn city_config(defaults: &toml::Table, settings: &toml::Table, name: Option<&str>) -> Result<CityConfig> {
    let mut table = defaults.clone();
    merge(&mut table, settings);
    if let Some(name) = name {
        table.insert("city_name".into(), toml::Value::String(name.to_owned()));
    }
    let config: CityConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_owned()))?;
    config.validate()?;
    Ok(config)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let file: RunFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.cities.is_empty() {
            return Err(Error::Config("run file lists no cities".into()));
        }
        let mut cities = Vec::with_capacity(file.cities.len());
        let mut names = std::collections::BTreeSet::new();
        for entry in file.cities {
            if !names.insert(entry.name.clone()) {
                return Err(Error::Config(format!("city `{}` listed twice", entry.name)));
            }
            if entry.name.is_empty() || entry.name.contains(['/', '\\']) || entry.name.starts_with('.') {
                return Err(Error::Config(format!("`{}` is not usable as a directory name", entry.name)));
            }
            let ntl = match (entry.ntl, entry.pixels) {
                (Some(p), None) => NtlSource::Daily(resolve(base_dir, &p)),
                (None, Some(p)) => NtlSource::Pixels {
                    path: resolve(base_dir, &p),
                    scale_factor: entry.scale_factor.unwrap_or(1.0),
                },
                _ => {
                    return Err(Error::Config(format!(
                        "city `{}` needs exactly one of `ntl` or `pixels`",
                        entry.name
                    )))
                }
            };
            cities.push(CityInput {
                config: city_config(&file.defaults, &entry.settings, Some(&entry.name))?,
                weather: resolve(base_dir, &entry.weather),
                ntl,
                schema: entry.schema,
                selection: entry.selection,
            });
        }
        let formats = file.formats.unwrap_or_else(|| vec![Format::Csv]);
        if formats.is_empty() {
            return Err(Error::Config("`formats` must not be empty".into()));
        }
        if file.analysis.p_grid.is_empty() || file.analysis.d_grid.is_empty() {
            return Err(Error::Config("sweep grids must be non-empty".into()));
        }
        Ok(Self {
            cities,
            out_dir: resolve(base_dir, &file.out_dir.unwrap_or_else(|| PathBuf::from("reports"))),
            formats,
            jobs: file.jobs,
            analysis: file.analysis,
        })
    }

    pub fn input_paths(&self) -> Vec<&Path> {
        self.cities
            .iter()
            .flat_map(|c| {
                let ntl = match &c.ntl {
                    NtlSource::Daily(p) => p,
                    NtlSource::Pixels { path, .. } => path,
                };
                [c.weather.as_path(), ntl.as_path()]
            })
            .collect()
    }
}

/// Reads a run file and returns the config with the SHA-256 of its bytes.
pub fn load_run_config(path: &Path) -> Result<(RunConfig, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let hash = format!("{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok((RunConfig::parse(&text, base)?, hash))
}

/// Settings for single-stage commands: the run file's defaults, merged with
/// the named city's settings when given. Without a file, the built-in
/// defaults.
pub fn load_city_settings(path: Option<&Path>, city: Option<&str>) -> Result<CityConfig> {
    let Some(path) = path else {
        let mut config = CityConfig::default();
        if let Some(c) = city {
            config.city_name = c.to_owned();
        }
        return Ok(config);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: RunFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let settings = match city {
        Some(name) => match file.cities.iter().find(|c| c.name == name) {
            Some(c) => c.settings.clone(),
            None => toml::Table::new(),
        },
        None => toml::Table::new(),
    };
    city_config(&file.defaults, &settings, city)
}

/// Ingestion bookkeeping for one city.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadReport {
    pub weather_rows_rejected: usize,
    pub ntl_rows_rejected: usize,
    pub join: JoinReport,
    pub aggregation: Option<AggregateReport>,
}

pub fn load_ntl(source: &NtlSource) -> Result<(Vec<NtlDaily>, usize, Option<AggregateReport>)> {
    match source {
        NtlSource::Daily(path) => {
            let loaded = ingest::load_ntl_csv(path)?;
            for r in &loaded.rejected {
                log::warn!("{}: line {} rejected: {}", path.display(), r.line, r.reason);
            }
            Ok((loaded.records, loaded.rejected.len(), None))
        }
        NtlSource::Pixels { path, scale_factor } => {
            let pixels = ntl::load_pixel_csv(path)?;
            let (series, report) = ntl::aggregate_series(&pixels, *scale_factor)?;
            Ok((series, 0, Some(report)))
        }
    }
}

pub fn load_weather(path: &Path, schema: &WeatherSchema) -> Result<(Vec<DailyWeather>, usize)> {
    let loaded = ingest::load_weather_csv(path, schema)?;
    for r in &loaded.rejected {
        log::warn!("{}: line {} rejected: {}", path.display(), r.line, r.reason);
    }
    Ok((loaded.records, loaded.rejected.len()))
}

pub fn load_city(weather: &Path, ntl: &NtlSource, schema: &WeatherSchema) -> Result<(CityDataset, LoadReport)> {
    let (weather, weather_rows_rejected) = load_weather(weather, schema)?;
    let (ntl, ntl_rows_rejected, aggregation) = load_ntl(ntl)?;
    let (dataset, join) = join_on_date(&weather, &ntl)?;
    if join.dropped_weather + join.dropped_ntl > 0 {
        log::info!(
            "join kept {} dates, dropped {} weather and {} radiance rows",
            join.retained,
            join.dropped_weather,
            join.dropped_ntl
        );
    }
    Ok((
        dataset,
        LoadReport {
            weather_rows_rejected,
            ntl_rows_rejected,
            join,
            aggregation,
        },
    ))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_estimates(path: &Path, estimates: &[DmlEstimate], format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(path, estimates),
        Format::Csv => {
            let mut out = csv_writer(path)?;
            for e in estimates {
                out.serialize(e).map_err(|e| csv_err(path, e))?;
            }
            flush(out, path)
        }
    }
}

/// `date,temp_used,hot_day,heatwave,onset`
pub fn write_heatwaves(path: &Path, hw: &HeatwaveSeries, temps: &[f64]) -> Result<()> {
    let mut out = csv_writer(path)?;
    write_record(&mut out, path, ["date", "temp_used", "hot_day", "heatwave", "onset"])?;
    let onsets: std::collections::BTreeSet<usize> = hw.onsets().into_iter().collect();
    for (i, date) in hw.dates.iter().enumerate() {
        write_record(
            &mut out,
            path,
            [
                date.to_string(),
                fmt_num(temps[i]),
                hw.hot_day[i].to_string(),
                hw.heatwave[i].to_string(),
                u8::from(onsets.contains(&i)).to_string(),
            ],
        )?;
    }
    flush(out, path)
}

fn write_diagnostics_csv(path: &Path, report: &diagnostics::DiagnosticsReport) -> Result<()> {
    let mut out = csv_writer(path)?;
    write_record(&mut out, path, ["city", "test", "statistic", "p_value", "lags"])?;
    let rows = [
        ("adf_log_ntl", report.adf_log_ntl.statistic, report.adf_log_ntl.p_value, report.adf_log_ntl.lags_used),
        (
            "adf_temperature",
            report.adf_temperature.statistic,
            report.adf_temperature.p_value,
            report.adf_temperature.lags_used,
        ),
        (
            "granger_temperature_to_ntl",
            report.granger_temp_to_ntl.f_statistic,
            report.granger_temp_to_ntl.p_value,
            report.granger_temp_to_ntl.lag_used,
        ),
        (
            "granger_ntl_to_temperature",
            report.granger_ntl_to_temp.f_statistic,
            report.granger_ntl_to_temp.p_value,
            report.granger_ntl_to_temp.lag_used,
        ),
    ];
    for (test, stat, p, lags) in rows {
        write_record(
            &mut out,
            path,
            [report.city.clone(), test.to_owned(), fmt_num(stat), fmt_num(p), lags.to_string()],
        )?;
    }
    flush(out, path)
}

/// Heatwave flags for a dataset under the given settings.
pub fn detect_for(dataset: &CityDataset, config: &CityConfig) -> Result<(Threshold, HeatwaveSeries, Vec<f64>)> {
    let temps = dataset.temperatures(config.temperature);
    let (threshold, hw) = detect(&dataset.dates(), &temps, config.percentile_p, config.duration_d)?;
    Ok((threshold, hw, temps))
}

/// Design matrix for a dataset under the given settings.
pub fn features_for(dataset: &CityDataset, config: &CityConfig) -> Result<FeatureMatrix> {
    let (_, hw, _) = detect_for(dataset, config)?;
    assemble_design(dataset, &hw, config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CitySummary<'a> {
    city: &'a str,
    settings: &'a CityConfig,
    threshold: Threshold,
    heatwave_days: usize,
    hot_days: usize,
    load: &'a LoadReport,
    estimate: &'a DmlEstimate,
    /// Same fit with the treatment interactions removed from the confounders.
    estimate_without_treatment_interactions: Option<&'a DmlEstimate>,
}

/// Runs every stage for one city and writes its report files. Returns the
/// written file names, relative to the city directory.
pub fn run_city(city: &CityInput, analysis: &AnalysisOptions, formats: &[Format], dir: &Path) -> Result<Vec<String>> {
    let config = &city.config;
    let mut files = Vec::new();
    let mut record = |name: String| {
        files.push(name.clone());
        dir.join(name)
    };
    let (dataset, load) = load_city(&city.weather, &city.ntl, &city.schema)?;
    let (threshold, hw, temps) = detect_for(&dataset, config)?;
    write_heatwaves(&record("heatwaves.csv".into()), &hw, &temps)?;

    let fm = assemble_design(&dataset, &hw, config)?;
    let estimate = run_dml(&fm, config)?;
    for &f in formats {
        write_estimates(&record(format!("estimate.{}", f.extension())), std::slice::from_ref(&estimate), f)?;
    }
    let alternate = if config.feature_spec.has_treatment_interactions() {
        let alt_config = CityConfig {
            feature_spec: config.feature_spec.drop_treatment_interactions(),
            ..config.clone()
        };
        let est = run_dml(&assemble_design(&dataset, &hw, &alt_config)?, &alt_config)?;
        for &f in formats {
            let path = record(format!("estimate_without_treatment_interactions.{}", f.extension()));
            write_estimates(&path, std::slice::from_ref(&est), f)?;
        }
        Some(est)
    } else {
        None
    };

    if analysis.sweep {
        let options = SweepOptions {
            p_grid: analysis.p_grid.clone(),
            d_grid: analysis.d_grid.clone(),
            min_treated: analysis.min_treated,
            selection: city.selection.clone().unwrap_or_else(|| analysis.selection.clone()),
        };
        let result = sweep(&dataset, config, &options)?;
        for &f in formats {
            let path = record(format!("sweep.{}", f.extension()));
            match f {
                Format::Csv => result.write_csv(&path)?,
                Format::Json => write_json(&path, &result)?,
            }
        }
    }

    if analysis.event_study {
        let result = event_study(&dataset, &hw, EventWindow::default())?;
        for &f in formats {
            let path = record(format!("event_study.{}", f.extension()));
            match f {
                Format::Csv => result.write_csv(&path)?,
                Format::Json => write_json(&path, &result)?,
            }
        }
    }

    if analysis.diagnostics {
        let report = diagnostics::diagnose(&config.city_name, &dataset, config.temperature, analysis.granger_max_lag)?;
        for &f in formats {
            let path = record(format!("diagnostics.{}", f.extension()));
            match f {
                Format::Csv => write_diagnostics_csv(&path, &report)?,
                Format::Json => write_json(&path, &report)?,
            }
        }
    }

    let summary = CitySummary {
        city: &config.city_name,
        settings: config,
        threshold,
        heatwave_days: hw.treated_days(),
        hot_days: hw.hot_day.iter().filter(|&&h| h == 1).count(),
        load: &load,
        estimate: &estimate,
        estimate_without_treatment_interactions: alternate.as_ref(),
    };
    write_json(&record("summary.json".into()), &summary)?;
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CityStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityRecord {
    pub name: String,
    pub seed: u64,
    pub status: CityStatus,
    pub error: Option<String>,
    pub files: Vec<String>,
}

/// Enough to reproduce a run: the exact config bytes (by hash), the seeds
/// and the software version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub config_sha256: String,
    pub seed_override: Option<u64>,
    pub formats: Vec<Format>,
    pub cities: Vec<CityRecord>,
}

/// Name of the marker file left in the directory of a city that failed.
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Errors of cities that failed, in config order.
    pub failures: Vec<(String, Error)>,
}

/// Runs every city of a run file. Cities run concurrently on the current
/// rayon pool; a failing city does not stop the others but is marked in
/// its directory and in the manifest.
pub fn run_pipeline(config_path: &Path, overrides: &Overrides) -> Result<PipelineOutcome> {
    let (mut run, hash) = load_run_config(config_path)?;
    if let Some(out) = &overrides.out_dir {
        run.out_dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        for c in &mut run.cities {
            c.config.seed = seed;
        }
    }
    if let Some(f) = overrides.format {
        run.formats = vec![f];
    }
    for path in run.input_paths() {
        if !path.is_file() {
            return Err(Error::Validation(format!("input file not found: {}", path.display())));
        }
    }
    std::fs::create_dir_all(&run.out_dir).map_err(|e| Error::io(&run.out_dir, e))?;

    let results: Vec<Result<Vec<String>>> = run
        .cities
        .par_iter()
        .map(|city| {
            let dir = run.out_dir.join(&city.config.city_name);
            let marker = dir.join(FAILED_MARKER);
            if marker.exists() {
                std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
            }
            let result = run_city(city, &run.analysis, &run.formats, &dir);
            if let Err(e) = &result {
                log::error!("{}: {e}", city.config.city_name);
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                std::fs::write(&marker, format!("{e}\n")).map_err(|e| Error::io(&marker, e))?;
            }
            result
        })
        .collect();

    let mut records = Vec::with_capacity(run.cities.len());
    let mut failures = Vec::new();
    for (city, result) in run.cities.iter().zip(results) {
        let name = city.config.city_name.clone();
        let record = match result {
            Ok(files) => CityRecord {
                name,
                seed: city.config.seed,
                status: CityStatus::Ok,
                error: None,
                files,
            },
            Err(e) => {
                let record = CityRecord {
                    name: name.clone(),
                    seed: city.config.seed,
                    status: CityStatus::Failed,
                    error: Some(e.to_string()),
                    files: vec![FAILED_MARKER.to_owned()],
                };
                failures.push((name, e));
                record
            }
        };
        records.push(record);
    }
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config_sha256: hash,
        seed_override: overrides.seed,
        formats: run.formats.clone(),
        cities: records,
    };
    write_json(&run.out_dir.join("manifest.json"), &manifest)?;
    Ok(PipelineOutcome {
        out_dir: run.out_dir,
        manifest,
        failures,
    })
}

/// Writes the pixel table's daily aggregate as a radiance CSV.
pub fn stage_aggregate_ntl(pixels: &Path, scale_factor: f64, out: &Path) -> Result<AggregateReport> {
    let table = ntl::load_pixel_csv(pixels)?;
    let (series, report) = ntl::aggregate_series(&table, scale_factor)?;
    ingest::write_ntl_csv(out, &series)?;
    Ok(report)
}

/// Writes per-day heatwave flags for a weather file.
pub fn stage_detect_heatwaves(
    weather: &Path,
    schema: &WeatherSchema,
    config: &CityConfig,
    out: &Path,
) -> Result<Threshold> {
    let (rows, _) = load_weather(weather, schema)?;
    let dates: Vec<_> = rows.iter().map(|r| r.date).collect();
    let temps: Vec<f64> = rows.iter().map(|r| r.temperature(config.temperature)).collect();
    let (threshold, hw) = detect(&dates, &temps, config.percentile_p, config.duration_d)?;
    write_heatwaves(out, &hw, &temps)?;
    Ok(threshold)
}

pub fn stage_features(dataset: &CityDataset, config: &CityConfig, out: &Path) -> Result<FeatureMatrix> {
    let fm = features_for(dataset, config)?;
    fm.write_csv(out)?;
    Ok(fm)
}

pub fn stage_fit(features: &Path, config: &CityConfig, out: &Path, format: Format) -> Result<DmlEstimate> {
    let fm = FeatureMatrix::load_csv(features)?;
    let estimate = run_dml(&fm, config)?;
    write_estimates(out, std::slice::from_ref(&estimate), format)?;
    Ok(estimate)
}

pub fn stage_sweep(
    dataset: &CityDataset,
    config: &CityConfig,
    options: &SweepOptions,
    out: &Path,
    format: Format,
) -> Result<diagnostics::SweepResult> {
    let result = sweep(dataset, config, options)?;
    match format {
        Format::Csv => result.write_csv(out)?,
        Format::Json => write_json(out, &result)?,
    }
    Ok(result)
}

pub fn stage_event_study(
    dataset: &CityDataset,
    config: &CityConfig,
    out: &Path,
    format: Format,
) -> Result<diagnostics::EventStudyResult> {
    let (_, hw, _) = detect_for(dataset, config)?;
    let result = event_study(dataset, &hw, EventWindow::default())?;
    match format {
        Format::Csv => result.write_csv(out)?,
        Format::Json => write_json(out, &result)?,
    }
    Ok(result)
}

pub fn stage_diagnose(
    dataset: &CityDataset,
    config: &CityConfig,
    max_lag: usize,
    out: &Path,
    format: Format,
) -> Result<diagnostics::DiagnosticsReport> {
    let report = diagnostics::diagnose(&config.city_name, dataset, config.temperature, max_lag)?;
    match format {
        Format::Csv => write_diagnostics_csv(out, &report)?,
        Format::Json => write_json(out, &report)?,
    }
    Ok(report)
}

/// Known ground truth of a synthetic city written by [`stage_synth`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub city: SynthCityConfig,
    pub design: SynthConfig,
    pub effect_days: usize,
}

/// Writes `weather.csv` and `ntl.csv` for a synthetic city, a design matrix
/// `design.csv` drawn from the partially linear model, and `truth.json`.
pub fn stage_synth(city: &SynthCityConfig, design: &SynthConfig, out_dir: &Path) -> Result<SynthTruth> {
    let generated = generate_city(city)?;
    ingest::write_weather_csv(out_dir.join("weather.csv"), &generated.weather)?;
    ingest::write_ntl_csv(out_dir.join("ntl.csv"), &generated.ntl)?;
    let (fm, _) = generate(design)?;
    fm.write_csv(out_dir.join("design.csv"))?;
    let truth = SynthTruth {
        city: city.clone(),
        design: design.clone(),
        effect_days: generated.effect_days.iter().filter(|&&e| e == 1).count(),
    };
    write_json(&out_dir.join("truth.json"), &truth)?;
    Ok(truth)
}

/// Fetches (or reads from cache) daily weather and writes it as a weather CSV.
pub fn stage_fetch_weather(
    city: &str,
    start: chrono::NaiveDate,
    end: chrono::NaiveDate,
    cache_dir: &Path,
    out: &Path,
) -> Result<usize> {
    use crate::weather_api::{default_transport, WeatherClient, CREDENTIALS_ENV};
    let key = std::env::var(CREDENTIALS_ENV).unwrap_or_default();
    let client = WeatherClient::new(default_transport()?, cache_dir);
    let rows = client.fetch_weather(city, start, end, &key)?;
    ingest::write_weather_csv(out, &rows)?;
    Ok(rows.len())
}

/// Summary lines for a finished run, one per city.
pub fn describe(outcome: &PipelineOutcome) -> BTreeMap<String, String> {
    outcome
        .manifest
        .cities
        .iter()
        .map(|c| {
            let text = match &c.error {
                None => format!("ok ({} files)", c.files.len()),
                Some(e) => format!("FAILED: {e}"),
            };
            (c.name.clone(), text)
        })
        .collect()
}
