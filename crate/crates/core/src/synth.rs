//! Synthetic data with known ground truth.
//!
//! [`generate`] draws a design matrix directly from a partially linear
//! model with a chosen effect and amount of confounding. [`generate_city`]
//! produces a weather and radiance series pair in the input file format, with
//! a heatwave effect injected into log radiance.

use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::heatwave;
use crate::types::{DailyWeather, NtlDaily, TemperatureColumn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Linear,
    Quadratic,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_days: usize,
    /// Effect of D on Y, in log points.
    pub true_theta: f64,
    /// Scale of the shared index entering both the treatment propensity and
    /// the outcome. Zero makes D independent of X.
    pub confounding_strength: f64,
    pub nonlinearity: Nonlinearity,
    pub noise_sd: f64,
    pub seed: u64,
    pub n_covariates: usize,
    /// Clip the propensity to [0.05, 0.95].
    pub bound_propensity: bool,
    pub start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_days: 2000,
            true_theta: 0.5,
            confounding_strength: 1.0,
            nonlinearity: Nonlinearity::Linear,
            noise_sd: 1.0,
            seed: 0,
            n_covariates: 10,
            bound_propensity: true,
            start: NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date"),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_days < 20 {
            return Err(Error::Argument(format!("n_days must be at least 20, got {}", self.n_days)));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Argument(format!("noise_sd must be positive, got {}", self.noise_sd)));
        }
        if self.n_covariates < 3 {
            return Err(Error::Argument("need at least 3 covariates".into()));
        }
        if !self.true_theta.is_finite() || !self.confounding_strength.is_finite() {
            return Err(Error::Argument("true_theta and confounding_strength must be finite".into()));
        }
        Ok(())
    }
}

/// Propensity bounds under positivity.
pub const PROPENSITY_BOUNDS: (f64, f64) = (0.05, 0.95);

fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64) -> Vec<f64> {
    let innov = (1.0 - phi * phi).sqrt();
    let mut v = rng.sample::<f64, _>(StandardNormal);
    (0..n)
        .map(|_| {
            let out = v;
            v = phi * v + innov * rng.sample::<f64, _>(StandardNormal);
            out
        })
        .collect()
}

/// Shared confounding index `h(X)`, roughly unit scale.
fn index(x: &DMatrix<f64>, r: usize, kind: Nonlinearity) -> f64 {
    let (a, b, c) = (x[(r, 0)], x[(r, 1)], x[(r, 2)]);
    match kind {
        Nonlinearity::Linear => 0.6 * a + 0.4 * b - 0.3 * c,
        Nonlinearity::Quadratic => 0.5 * (a * a - 1.0) + 0.4 * b - 0.3 * c,
        Nonlinearity::Interaction => 0.6 * a * b + 0.4 * b - 0.3 * c,
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Draws `(X, D, Y)` with `Y = θ·D + g(X) + ε` and `D ~ Bernoulli(m(X))`.
/// Covariates share a persistent common factor, like daily weather.
pub fn generate(config: &SynthConfig) -> Result<(FeatureMatrix, f64)> {
    config.validate()?;
    let n = config.n_days;
    let p = config.n_covariates;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let common = ar1(&mut rng, n, 0.8);
    let own: Vec<Vec<f64>> = (0..p).map(|_| ar1(&mut rng, n, 0.5)).collect();
    let x = DMatrix::from_fn(n, p, |r, c| 0.6 * common[r] + 0.8 * own[c][r]);
    let base_logit = (0.3f64 / 0.7).ln();
    let mut d = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for r in 0..n {
        let h = index(&x, r, config.nonlinearity);
        let mut m = logistic(base_logit + config.confounding_strength * h);
        if config.bound_propensity {
            m = m.clamp(PROPENSITY_BOUNDS.0, PROPENSITY_BOUNDS.1);
        }
        let treated = f64::from(u8::from(rng.gen::<f64>() < m));
        let g = config.confounding_strength * h + 0.5 * x[(r, 3 % p)] - 0.25 * x[(r, 4 % p)];
        let eps: f64 = config.noise_sd * rng.sample::<f64, _>(StandardNormal);
        d.push(treated);
        y.push(config.true_theta * treated + g + eps);
    }
    let dates = (0..n).map(|i| config.start + Duration::days(i as i64)).collect();
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok((FeatureMatrix::new(dates, names, x, d, y)?, config.true_theta))
}

/// Exhaustive reference count of heatwave days: every day whose trailing
/// `d`-day window is entirely at or above the `p` quantile of `temps`.
pub fn brute_force_heatwave_count(temps: &[f64], p: f64, d: usize) -> usize {
    if temps.is_empty() || d == 0 {
        return 0;
    }
    let mut sorted = temps.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite temperatures"));
    let pos = p * (sorted.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = pos.ceil() as usize;
    let tau = sorted[below] + (pos - below as f64) * (sorted[above] - sorted[below]);
    (0..temps.len())
        .filter(|&t| t + 1 >= d && temps[t + 1 - d..=t].iter().all(|&v| v >= tau))
        .count()
}

/// Synthetic city for exercising the full pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCityConfig {
    pub n_days: usize,
    pub start: NaiveDate,
    pub seed: u64,
    /// Log-point shift in radiance on effect days.
    pub effect: f64,
    /// Percentile defining hot days for the injected effect.
    pub effect_percentile: f64,
    /// Effect days are hot days closing a run of at least this many hot days.
    pub effect_min_run: usize,
    /// Standard deviation of the idiosyncratic log-radiance noise.
    pub noise_sd: f64,
    pub mean_temp: f64,
    /// Temperature column whose hot runs carry the effect.
    pub effect_temperature: TemperatureColumn,
}

impl Default for SynthCityConfig {
    fn default() -> Self {
        Self {
            n_days: 1461,
            start: NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date"),
            seed: 0,
            effect: 0.1,
            effect_percentile: 0.80,
            effect_min_run: 3,
            noise_sd: 0.05,
            mean_temp: 22.0,
            effect_temperature: TemperatureColumn::TempAvg,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCity {
    pub weather: Vec<DailyWeather>,
    pub ntl: Vec<NtlDaily>,
    /// 1 on days carrying the injected effect.
    pub effect_days: Vec<u8>,
}

/// Seasonal temperature with persistent anomalies, weather covariates tied
/// to temperature, and log radiance responding to season, humidity and the
/// injected heatwave effect.
pub fn generate_city(config: &SynthCityConfig) -> Result<SynthCity> {
    if config.n_days < 30 {
        return Err(Error::Argument(format!("n_days must be at least 30, got {}", config.n_days)));
    }
    if !(config.noise_sd >= 0.0) || config.effect_min_run < 1 {
        return Err(Error::Argument("noise_sd must be non-negative and effect_min_run at least 1".into()));
    }
    let n = config.n_days;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let anomaly = ar1(&mut rng, n, 0.75);
    let season: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 365.25).sin())
        .collect();
    let mut weather = Vec::with_capacity(n);
    for i in 0..n {
        let temp_avg = config.mean_temp + 6.0 * season[i] + 2.5 * anomaly[i];
        let temp_max = temp_avg + 5.0 + rng.gen::<f64>() * 2.0;
        let humidity = (65.0 - 1.5 * (temp_avg - config.mean_temp) + 8.0 * rng.sample::<f64, _>(StandardNormal))
            .clamp(5.0, 100.0);
        let dew = (temp_avg - (100.0 - humidity) / 5.0).min(temp_max);
        let cloudcover = (40.0 + 20.0 * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 100.0);
        let precip = if rng.gen::<f64>() < 0.25 {
            -5.0 * rng.gen::<f64>().max(1e-12).ln()
        } else {
            0.0
        };
        let windspeed = (12.0 + 4.0 * rng.sample::<f64, _>(StandardNormal)).max(0.0);
        let solarenergy = (15.0 + 5.0 * season[i] - 0.08 * cloudcover).max(0.0);
        weather.push(DailyWeather {
            date: config.start + Duration::days(i as i64),
            temp_max,
            temp_avg,
            humidity,
            dew,
            cloudcover,
            precip,
            windspeed,
            solarenergy,
            cdd: None,
        });
    }
    let temps: Vec<f64> = weather.iter().map(|w| w.temperature(config.effect_temperature)).collect();
    let tau = heatwave::percentile_threshold(&temps, config.effect_percentile)?.tau;
    let hot = heatwave::hot_day_indicator(&temps, tau)?;
    let effect_days = heatwave::heatwave_indicator(&hot, config.effect_min_run)?;
    let ntl = (0..n)
        .map(|i| {
            let w = &weather[i];
            let log_ntl = 2.5 + 0.15 * season[i] - 0.002 * (w.humidity - 65.0) - 0.003 * w.cloudcover
                + config.effect * f64::from(effect_days[i])
                + config.noise_sd * rng.sample::<f64, _>(StandardNormal);
            NtlDaily {
                date: w.date,
                radiance: log_ntl.exp(),
                gap_fraction: rng.gen::<f64>() * 0.3,
            }
        })
        .collect();
    Ok(SynthCity {
        weather,
        ntl,
        effect_days,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ols;
    use proptest::prelude::*;

    #[test]
    fn brute_force_examples() {
        let inc: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(brute_force_heatwave_count(&inc, 0.8, 2), 1);
        let temps = [20.0, 31.0, 25.0, 33.0, 29.0, 35.0, 22.0];
        let hot = {
            let mut s = temps.to_vec();
            s.sort_by(f64::total_cmp);
            let pos = 0.8 * 6.0;
            let tau = s[4] + (pos - 4.0) * (s[5] - s[4]);
            temps.iter().filter(|&&t| t >= tau).count()
        };
        assert_eq!(brute_force_heatwave_count(&temps, 0.8, 1), hot);
        assert_eq!(brute_force_heatwave_count(&[25.0; 12], 0.9, 3), 10);
    }

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig {
            n_days: 300,
            seed: 4,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&config).unwrap(), generate(&config).unwrap());
        let other = SynthConfig {
            seed: 5,
            ..config.clone()
        };
        assert_ne!(generate(&other).unwrap().0.y, generate(&config).unwrap().0.y);
        let city = SynthCityConfig::default();
        assert_eq!(generate_city(&city).unwrap(), generate_city(&city).unwrap());
    }

    #[test]
    fn no_confounding_difference_in_means() {
        let config = SynthConfig {
            n_days: 4000,
            confounding_strength: 0.0,
            seed: 11,
            ..SynthConfig::default()
        };
        let (fm, theta) = generate(&config).unwrap();
        let (mut s1, mut s0, mut n1, mut n0) = (Vec::new(), Vec::new(), 0.0, 0.0);
        for (y, d) in fm.y.iter().zip(&fm.d) {
            if *d == 1.0 {
                s1.push(*y);
                n1 += 1.0;
            } else {
                s0.push(*y);
                n0 += 1.0;
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let diff = mean(&s1) - mean(&s0);
        let se = (var(&s1) / n1 + var(&s0) / n0).sqrt();
        assert!((diff - theta).abs() < 2.0 * se, "{diff} vs {theta} (se {se})");
    }

    #[test]
    fn confounding_biases_naive_regression() {
        let config = SynthConfig {
            n_days: 2000,
            confounding_strength: 3.0,
            seed: 2,
            ..SynthConfig::default()
        };
        let (fm, theta) = generate(&config).unwrap();
        let x = DMatrix::from_fn(fm.nrows(), 2, |r, c| if c == 0 { 1.0 } else { fm.d[r] });
        let fit = ols(&x, &fm.y).unwrap();
        assert!((fit.coef[1] - theta).abs() > 3.0 * fit.se[1]);
    }

    #[test]
    fn propensity_bound_keeps_both_arms() {
        let config = SynthConfig {
            n_days: 3000,
            confounding_strength: 8.0,
            seed: 1,
            ..SynthConfig::default()
        };
        let (fm, _) = generate(&config).unwrap();
        let treated = fm.d.iter().sum::<f64>() / fm.nrows() as f64;
        assert!(treated > 0.05 && treated < 0.95);
    }

    #[test]
    fn city_effect_days_follow_rule() {
        let city = generate_city(&SynthCityConfig::default()).unwrap();
        let temps: Vec<f64> = city.weather.iter().map(|w| w.temp_avg).collect();
        let count = city.effect_days.iter().filter(|&&e| e == 1).count();
        assert_eq!(count, brute_force_heatwave_count(&temps, 0.8, 3));
        assert!(count > 30);
        for w in &city.weather {
            w.validate().unwrap();
        }
        for r in &city.ntl {
            r.validate().unwrap();
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(generate(&SynthConfig {
            noise_sd: 0.0,
            ..SynthConfig::default()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            n_days: 5,
            ..SynthConfig::default()
        })
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn detector_matches_brute_force(
            temps in prop::collection::vec(-10.0f64..45.0, 1..=60),
            pi in 0usize..3,
            d in 1usize..=4,
        ) {
            let p = [0.80, 0.85, 0.90][pi];
            let tau = heatwave::percentile_threshold(&temps, p).unwrap().tau;
            let hot = heatwave::hot_day_indicator(&temps, tau).unwrap();
            let total = heatwave::heatwave_indicator(&hot, d).unwrap().iter().map(|&h| h as usize).sum::<usize>();
            prop_assert_eq!(total, brute_force_heatwave_count(&temps, p, d));
        }

        #[test]
        fn detector_matches_brute_force_with_ties(
            temps in prop::collection::vec((20i32..26).prop_map(f64::from), 1..=60),
            pi in 0usize..3,
            d in 1usize..=4,
        ) {
            let p = [0.80, 0.85, 0.90][pi];
            let tau = heatwave::percentile_threshold(&temps, p).unwrap().tau;
            let hot = heatwave::hot_day_indicator(&temps, tau).unwrap();
            let total = heatwave::heatwave_indicator(&hot, d).unwrap().iter().map(|&h| h as usize).sum::<usize>();
            prop_assert_eq!(total, brute_force_heatwave_count(&temps, p, d));
        }
    }
}
