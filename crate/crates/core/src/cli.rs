//! Command-line front end. Exit codes: 0 success, 1 invalid input or
//! usage, 2 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::diagnostics::SweepOptions;
use crate::error::{Error, Result};
use crate::ingest::WeatherSchema;
use crate::pipeline::{self, Format, NtlSource, Overrides};
use crate::synth::{SynthCityConfig, SynthConfig};
use crate::types::{CityConfig, CityDataset, TemperatureColumn};

#[derive(Debug, Parser)]
#[command(name = "heatlight", version, about = "Heatwave effects on night-time lights")]
pub struct Cli {
    /// Run file (TOML). Single stages read its [defaults] and, with --city,
    /// that city's settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for `pipeline` and `synth`, output file otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides every configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CityArgs {
    #[arg(long)]
    pub weather: PathBuf,
    /// Daily radiance CSV.
    #[arg(long, required_unless_present = "pixels", conflicts_with = "pixels")]
    pub ntl: Option<PathBuf>,
    /// Pixel-level radiance CSV, aggregated on the fly.
    #[arg(long)]
    pub pixels: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub scale_factor: f64,
    /// City whose settings to take from the run file.
    #[arg(long)]
    pub city: Option<String>,
}

#[derive(Debug, Args)]
pub struct HeatwaveArgs {
    /// Percentile threshold in (0, 1).
    #[arg(long)]
    pub p: Option<f64>,
    /// Minimum run of hot days.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_enum)]
    pub temperature: Option<TemperatureArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TemperatureArg {
    TempAvg,
    TempMax,
}

impl From<TemperatureArg> for TemperatureColumn {
    fn from(arg: TemperatureArg) -> Self {
        match arg {
            TemperatureArg::TempAvg => TemperatureColumn::TempAvg,
            TemperatureArg::TempMax => TemperatureColumn::TempMax,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every stage for every city in the run file.
    Pipeline,
    /// Pixel table to daily radiance CSV.
    AggregateNtl {
        #[arg(long)]
        pixels: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale_factor: f64,
    },
    /// Per-day hot-day and heatwave flags.
    DetectHeatwaves {
        #[arg(long)]
        weather: PathBuf,
        #[arg(long)]
        city: Option<String>,
        #[command(flatten)]
        heatwave: HeatwaveArgs,
    },
    /// Design matrix CSV (date, Y, D, covariates).
    Features {
        #[command(flatten)]
        inputs: CityArgs,
        #[command(flatten)]
        heatwave: HeatwaveArgs,
    },
    /// DML estimate from a design matrix CSV.
    Fit {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        city: Option<String>,
    },
    /// Estimates over the percentile × duration grid.
    Sweep {
        #[command(flatten)]
        inputs: CityArgs,
        #[arg(long, value_delimiter = ',')]
        p_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        d_grid: Option<Vec<usize>>,
    },
    /// Log radiance around heatwave onsets.
    EventStudy {
        #[command(flatten)]
        inputs: CityArgs,
        #[command(flatten)]
        heatwave: HeatwaveArgs,
    },
    /// ADF stationarity and Granger tests.
    Diagnose {
        #[command(flatten)]
        inputs: CityArgs,
        #[arg(long, default_value_t = 7)]
        max_lag: usize,
    },
    /// Synthetic weather/radiance pair and design matrix with known effects.
    Synth {
        #[arg(long, default_value_t = 1461)]
        days: usize,
        /// Log-point heatwave effect injected into radiance.
        #[arg(long, default_value_t = 0.1)]
        effect: f64,
        /// Effect in the synthetic design matrix.
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value = "2014-01-01")]
        start: NaiveDate,
        /// Temperature column whose hot runs carry the radiance effect.
        #[arg(long, value_enum, default_value = "temp-avg")]
        effect_temperature: TemperatureArg,
    },
    /// Daily weather from the weather API (or its cache) to a weather CSV.
    FetchWeather {
        #[arg(long)]
        city: String,
        #[arg(long)]
        start: NaiveDate,
        #[arg(long)]
        end: NaiveDate,
        #[arg(long, default_value = "weather_cache")]
        cache: PathBuf,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(Error::Argument("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn required_out(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Argument("--out is required for this command".into()))
}

fn settings(cli: &Cli, city: Option<&str>, hw: Option<&HeatwaveArgs>) -> Result<CityConfig> {
    let mut config = pipeline::load_city_settings(cli.config.as_deref(), city)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(hw) = hw {
        if let Some(p) = hw.p {
            config.percentile_p = p;
        }
        if let Some(d) = hw.d {
            config.duration_d = d;
        }
        if let Some(t) = hw.temperature {
            config.temperature = t.into();
        }
    }
    config.validate()?;
    Ok(config)
}

fn dataset(inputs: &CityArgs) -> Result<CityDataset> {
    let ntl = match (&inputs.ntl, &inputs.pixels) {
        (Some(p), _) => NtlSource::Daily(p.clone()),
        (None, Some(p)) => NtlSource::Pixels {
            path: p.clone(),
            scale_factor: inputs.scale_factor,
        },
        (None, None) => return Err(Error::Argument("--ntl or --pixels is required".into())),
    };
    Ok(pipeline::load_city(&inputs.weather, &ntl, &WeatherSchema::default())?.0)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let format = cli.format.unwrap_or(Format::Csv);
    match &cli.command {
        Command::Pipeline => {
            let config = cli
                .config
                .as_deref()
                .ok_or_else(|| Error::Argument("pipeline needs --config".into()))?;
            let overrides = Overrides {
                out_dir: cli.out.clone(),
                seed: cli.seed,
                format: cli.format,
            };
            let outcome = pipeline::run_pipeline(config, &overrides)?;
            for (city, status) in pipeline::describe(&outcome) {
                println!("{city}: {status}");
            }
            println!("reports in {}", outcome.out_dir.display());
            Ok(outcome.failures.iter().map(|(_, e)| exit_code(e)).max().unwrap_or(0))
        }
        Command::AggregateNtl { pixels, scale_factor } => {
            let report = pipeline::stage_aggregate_ntl(pixels, *scale_factor, required_out(cli)?)?;
            println!(
                "{} dates, {} fill pixels skipped, {} poor-quality pixels kept",
                report.dates, report.fill_pixels, report.poor_quality_pixels
            );
            Ok(0)
        }
        Command::DetectHeatwaves { weather, city, heatwave } => {
            let config = settings(cli, city.as_deref(), Some(heatwave))?;
            let t = pipeline::stage_detect_heatwaves(weather, &WeatherSchema::default(), &config, required_out(cli)?)?;
            println!("threshold {:.3} °C from {} days", t.tau, t.n_support);
            Ok(0)
        }
        Command::Features { inputs, heatwave } => {
            let config = settings(cli, inputs.city.as_deref(), Some(heatwave))?;
            let fm = pipeline::stage_features(&dataset(inputs)?, &config, required_out(cli)?)?;
            println!("{} rows × {} covariates", fm.nrows(), fm.ncols());
            Ok(0)
        }
        Command::Fit { features, city } => {
            let config = settings(cli, city.as_deref(), None)?;
            let out = required_out(cli)?;
            let est = pipeline::stage_fit(features, &config, out, format)?;
            println!(
                "theta {:.4}  se {:.4}  p {:.4}  change {:.2}%",
                est.theta, est.se, est.p_value, est.pct_change
            );
            Ok(0)
        }
        Command::Sweep { inputs, p_grid, d_grid } => {
            let config = settings(cli, inputs.city.as_deref(), None)?;
            let mut options = SweepOptions::default();
            if let Some(p) = p_grid {
                options.p_grid = p.clone();
            }
            if let Some(d) = d_grid {
                options.d_grid = d.clone();
            }
            let result = pipeline::stage_sweep(&dataset(inputs)?, &config, &options, required_out(cli)?, format)?;
            match result.chosen_cell() {
                Some(c) => println!("selected p = {}, d = {}", c.p, c.d),
                None => println!("no cell met the selection rule"),
            }
            Ok(0)
        }
        Command::EventStudy { inputs, heatwave } => {
            let config = settings(cli, inputs.city.as_deref(), Some(heatwave))?;
            let r = pipeline::stage_event_study(&dataset(inputs)?, &config, required_out(cli)?, format)?;
            println!("{} events", r.n_events);
            Ok(0)
        }
        Command::Diagnose { inputs, max_lag } => {
            let config = settings(cli, inputs.city.as_deref(), None)?;
            let r = pipeline::stage_diagnose(&dataset(inputs)?, &config, *max_lag, required_out(cli)?, format)?;
            println!(
                "ADF p: log NTL {:.4}, temperature {:.4}; Granger temperature → NTL p {:.4}",
                r.adf_log_ntl.p_value, r.adf_temperature.p_value, r.granger_temp_to_ntl.p_value
            );
            Ok(0)
        }
        Command::Synth {
            days,
            effect,
            theta,
            start,
            effect_temperature,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let city = SynthCityConfig {
                n_days: *days,
                start: *start,
                seed,
                effect: *effect,
                effect_temperature: (*effect_temperature).into(),
                ..SynthCityConfig::default()
            };
            let design = SynthConfig {
                n_days: *days,
                true_theta: *theta,
                seed,
                start: *start,
                ..SynthConfig::default()
            };
            let truth = pipeline::stage_synth(&city, &design, required_out(cli)?)?;
            println!("{} effect days", truth.effect_days);
            Ok(0)
        }
        Command::FetchWeather { city, start, end, cache } => {
            let n = pipeline::stage_fetch_weather(city, *start, *end, cache, required_out(cli)?)?;
            println!("{n} days");
            Ok(0)
        }
    }
}
