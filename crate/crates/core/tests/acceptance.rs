//! Acceptance checks, one PASS/FAIL line each. Runs with its own harness so
//! the lines always print; exits non-zero if any check fails. Pass criterion
//! numbers after `--` to run a subset.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{Duration as Days, NaiveDate};
use heatlight::diagnostics::{adf_test, adf_test_with_maxlag, event_study, granger_test, granger_test_at_lag, EventWindow};
use heatlight::dml::{p_value, run_dml, to_percent};
use heatlight::heatwave::{detect, heatwave_indicator, hot_day_indicator, percentile_threshold};
use heatlight::ingest::{load_weather_csv, WeatherSchema};
use heatlight::linalg::ols;
use heatlight::nuisance::lasso::{fit_lasso_at, lambda_max, soft_threshold};
use heatlight::nuisance::{LassoParams, NuisanceConfig};
use heatlight::synth::{brute_force_heatwave_count, generate, SynthConfig};
use heatlight::types::{CityConfig, CityDataset, DailyWeather, NtlDaily, TemperatureColumn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::Value;

type Outcome = (bool, String);
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("percent and p-value round-trip of the published table", Duration::from_secs(1), table_round_trip),
        ("heatwave detector equals brute-force count", Duration::from_secs(10), heatwave_oracle),
        ("lasso against closed-form oracles", Duration::from_secs(30), lasso_oracles),
        ("estimator recovery over 200 seeds", Duration::from_secs(600), dml_recovery),
        ("cross-fitting removes confounding bias", Duration::from_secs(120), orthogonality),
        ("event-study curve on a constructed shift", Duration::from_secs(10), event_study_fixture),
        ("ADF and Granger calibration and reference values", Duration::from_secs(300), test_calibration),
        ("heatwave-day counts on user-supplied city data", Duration::from_secs(60), real_city_counts),
        ("byte-identical reports across pipeline runs", Duration::from_secs(60), determinism),
    ];
    // Numeric arguments select criteria; other arguments (harness flags
    // passed by cargo) are ignored.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| (false, format!("panicked: {:?}", e.downcast_ref::<String>().map(String::as_str).or(e.downcast_ref::<&str>().copied()))));
        let elapsed = start.elapsed();
        let within = elapsed <= *budget;
        let status = match (pass, within) {
            (true, true) if detail.starts_with("SKIP") => "SKIP",
            (true, true) => "PASS",
            _ => "FAIL",
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {}: {status} | {name} | {detail} | {:.1}s (budget {}s)",
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn table_round_trip() -> Outcome {
    // city, percent change, standard error, p-value
    let rows = [
        ("São Paulo", 59.44, 0.1486, 0.0016),
        ("Delhi", 14.04, 0.0564, 0.0198),
        ("Cairo", 263.42, 0.4966, 0.0093),
        ("Guangzhou", 72.95, 0.2384, 0.0215),
    ];
    let mut worst_pct: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for (_, pct, se, p) in rows {
        let theta = (1.0 + pct / 100.0f64).ln();
        worst_pct = worst_pct.max((to_percent(theta) - pct).abs());
        worst_p = worst_p.max((p_value(theta, se).unwrap() - p).abs());
    }
    (
        worst_pct <= 0.01 && worst_p <= 0.0005,
        format!("max |Δ%| {worst_pct:.2e} (tol 0.01), max |Δp| {worst_p:.2e} (tol 0.0005)"),
    )
}

fn heatwave_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let mut comparisons = 0;
    for series in 0..1000 {
        let n = rng.gen_range(1..=60);
        let temps: Vec<f64> = (0..n)
            .map(|_| {
                let t = 25.0 + 5.0 * rng.sample::<f64, _>(StandardNormal);
                // every other series on a coarse grid so ties are common
                if series % 2 == 0 { t } else { t.round() }
            })
            .collect();
        for p in [0.80, 0.85, 0.90] {
            let tau = percentile_threshold(&temps, p).unwrap().tau;
            let hot = hot_day_indicator(&temps, tau).unwrap();
            for d in 1..=4 {
                let total = heatwave_indicator(&hot, d).unwrap().iter().filter(|&&h| h == 1).count();
                comparisons += 1;
                if total != brute_force_heatwave_count(&temps, p, d) {
                    mismatches += 1;
                }
            }
        }
    }
    (mismatches == 0, format!("{mismatches} mismatches in {comparisons} comparisons"))
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..n)
        .map(|r| 0.5 + (0..p).map(|c| (c as f64 - 2.0) * 0.3 * x[(r, c)]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
        .collect();
    (x, y)
}

fn lasso_oracles() -> Outcome {
    let params = LassoParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut worst_ls: f64 = 0.0;
    for i in 0..20 {
        let (n, p) = (100 + 10 * i, 4 + i % 7);
        let (x, y) = random_problem(&mut rng, n, p);
        let (beta, intercept) = fit_lasso_at(&x, &y, 0.0, &params, None).unwrap().original_scale();
        let a = DMatrix::from_fn(n, p + 1, |r, c| if c == 0 { 1.0 } else { x[(r, c - 1)] });
        let exact = a.tr_mul(&a).cholesky().unwrap().solve(&a.tr_mul(&DVector::from_column_slice(&y)));
        worst_ls = worst_ls.max((intercept - exact[0]).abs());
        for (j, b) in beta.iter().enumerate() {
            worst_ls = worst_ls.max((b - exact[j + 1]).abs());
        }
    }

    let mut nonzero_above_max = 0;
    for _ in 0..20 {
        let (x, y) = random_problem(&mut rng, 150, 8);
        let top = lambda_max(&x, &y).unwrap();
        for scale in [1.0, 1.01, 3.0] {
            let model = fit_lasso_at(&x, &y, scale * top, &params, None).unwrap();
            nonzero_above_max += model.coefficients.iter().filter(|&&b| b != 0.0).count();
        }
    }

    let mut worst_orth: f64 = 0.0;
    for seed in 0..10 {
        let (n, p) = (200, 6);
        let raw = DMatrix::from_fn(n, p + 1, |_, c| if c == 0 { 1.0 } else { rng.sample::<f64, _>(StandardNormal) });
        let q = raw.qr().q();
        // centred columns with XᵀX/n = I, so each coefficient is a soft threshold
        let x = DMatrix::from_fn(n, p, |r, c| q[(r, c + 1)] * (n as f64).sqrt());
        let y: Vec<f64> = (0..n)
            .map(|r| 1.0 + 0.8 * x[(r, 0)] - 0.3 * x[(r, 2)] + 0.05 * x[(r, 4)] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        for lambda in [0.0, 0.01, 0.05, 0.2, 0.5 + 0.1 * seed as f64] {
            let model = fit_lasso_at(&x, &y, lambda, &params, None).unwrap();
            for j in 0..p {
                let z = x.column(j).iter().zip(&y).map(|(a, b)| a * (b - y_mean)).sum::<f64>() / n as f64;
                worst_orth = worst_orth.max((model.coefficients[j] - soft_threshold(z, lambda)).abs());
            }
        }
    }
    (
        worst_ls <= 1e-6 && nonzero_above_max == 0 && worst_orth <= 1e-8,
        format!(
            "λ=0 vs normal equations {worst_ls:.1e} (tol 1e-6), nonzero at λ≥λmax {nonzero_above_max}, orthonormal vs soft threshold {worst_orth:.1e} (tol 1e-8)"
        ),
    )
}

fn dml_recovery() -> Outcome {
    // 100 trees per forest instead of 500 keeps 200 fits inside the budget
    // on one core.
    let runs: Vec<(f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let (fm, _) = generate(&SynthConfig {
                n_days: 2000,
                true_theta: 0.5,
                seed,
                ..SynthConfig::default()
            })
            .unwrap();
            let config = CityConfig {
                seed,
                learners: NuisanceConfig::default().with_trees(100),
                ..CityConfig::default()
            };
            let est = run_dml(&fm, &config).unwrap();
            (est.theta, est.se)
        })
        .collect();
    let n = runs.len() as f64;
    let within_2se = runs.iter().filter(|(t, s)| (t - 0.5).abs() <= 2.0 * s).count() as f64 / n;
    let coverage = runs.iter().filter(|(t, s)| (t - 0.5).abs() <= 1.959_963_985 * s).count() as f64 / n;
    let mean = runs.iter().map(|r| r.0).sum::<f64>() / n;
    (
        within_2se >= 0.90 && (0.90..=0.98).contains(&coverage),
        format!("within 2 SE {:.1}% (≥90%), 95% CI coverage {:.1}% ([90%, 98%]), mean θ̂ {mean:.4}", 100.0 * within_2se, 100.0 * coverage),
    )
}

fn orthogonality() -> Outcome {
    let (fm, theta) = generate(&SynthConfig {
        n_days: 2000,
        true_theta: 0.5,
        confounding_strength: 3.0,
        seed: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    let design = DMatrix::from_fn(fm.nrows(), 2, |r, c| if c == 0 { 1.0 } else { fm.d[r] });
    let naive = ols(&design, &fm.y).unwrap();
    let naive_gap = (naive.coef[1] - theta).abs() / naive.se[1];
    let est = run_dml(&fm, &CityConfig { seed: 1, ..CityConfig::default() }).unwrap();
    let (lo, hi) = est.confidence_interval(0.95);
    (
        naive_gap > 3.0 && (lo..=hi).contains(&theta),
        format!(
            "naive {:.3} is {naive_gap:.1} SE from θ={theta}; DML {:.3}, 95% CI [{lo:.3}, {hi:.3}]",
            naive.coef[1], est.theta
        ),
    )
}

fn flat_weather(date: NaiveDate, temp: f64) -> DailyWeather {
    DailyWeather {
        date,
        temp_max: temp + 5.0,
        temp_avg: temp,
        humidity: 60.0,
        dew: 15.0,
        cloudcover: 40.0,
        precip: 0.0,
        windspeed: 10.0,
        solarenergy: 20.0,
        cdd: None,
    }
}

fn event_study_fixture() -> Outcome {
    let n = 600;
    let start = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut temps: Vec<f64> = (0..n).map(|_| 24.0 + rng.gen::<f64>()).collect();
    let mut log_ntl: Vec<f64> = (0..n).map(|_| 2.0 + 0.02 * rng.sample::<f64, _>(StandardNormal)).collect();
    // three-day hot runs every 25 days; the heatwave (p = 0.9, d = 3)
    // starts on the third hot day, and radiance rises from its day 3 on
    let mut planted = 0;
    for run in (10..n - 15).step_by(25) {
        for t in &mut temps[run..run + 3] {
            *t = 36.0;
        }
        let onset = run + 2;
        for v in &mut log_ntl[onset + 3..=onset + 5] {
            *v += 0.2;
        }
        planted += 1;
    }
    let dates: Vec<NaiveDate> = (0..n).map(|i| start + Days::days(i as i64)).collect();
    let weather = dates.iter().zip(&temps).map(|(&d, &t)| flat_weather(d, t)).collect();
    let ntl = dates
        .iter()
        .zip(&log_ntl)
        .map(|(&date, &l)| NtlDaily { date, radiance: l.exp(), gap_fraction: 0.0 })
        .collect();
    let dataset = CityDataset::new(weather, ntl).unwrap();
    let (_, hw) = detect(&dates, &temps, 0.9, 3).unwrap();
    let r = event_study(&dataset, &hw, EventWindow::default()).unwrap();
    let worst = r
        .offsets
        .iter()
        .zip(&r.effect)
        .map(|(&o, &e)| (e - if o >= 3 { 0.2 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    (
        worst <= 0.03 && r.n_events == planted,
        format!("{} events, max deviation from the step {worst:.4} (tol 0.03)", r.n_events),
    )
}

fn white_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn white_noise_rejections(n: usize) -> usize {
    (0..500u64)
        .into_par_iter()
        .filter(|&s| adf_test(&white_noise(&mut ChaCha8Rng::seed_from_u64(s), n)).unwrap().p_value < 0.01)
        .count()
}

fn test_calibration() -> Outcome {
    // Daily city series run to thousands of points. At 200 points the
    // t-significance lag trimming costs power (about 90% here and in
    // statsmodels alike), so that rate is reported but not judged.
    let n = 500;
    let wn_reject = white_noise_rejections(n);
    let wn_reject_short = white_noise_rejections(200);
    let rw_p: Vec<f64> = (0..500u64)
        .into_par_iter()
        .map(|s| {
            let steps = white_noise(&mut ChaCha8Rng::seed_from_u64(10_000 + s), n);
            let walk: Vec<f64> = steps.iter().scan(0.0, |acc, e| { *acc += e; Some(*acc) }).collect();
            adf_test(&walk).unwrap().p_value
        })
        .collect();
    let rw_keep_1 = rw_p.iter().filter(|&&p| p >= 0.01).count();
    let rw_keep_5 = rw_p.iter().filter(|&&p| p >= 0.05).count();
    let granger_reject = (0..1000u64)
        .into_par_iter()
        .filter(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(20_000 + s);
            let (x, y) = (white_noise(&mut rng, n), white_noise(&mut rng, n));
            granger_test(&x, &y, 4).unwrap().p_value < 0.05
        })
        .count();
    let size = granger_reject as f64 / 1000.0;
    let worst_fixture = fixture_deviation();
    let pass = wn_reject >= 495 && rw_keep_1 >= 475 && (0.02..=0.08).contains(&size) && worst_fixture <= 1e-4;
    (
        pass,
        format!(
            "n={n}: white noise rejected at 1% {wn_reject}/500 (≥495, {wn_reject_short}/500 at n=200); random walk not rejected at 1% {rw_keep_1}/500 (≥475), at 5% {rw_keep_5}/500; Granger size {:.1}% ([2%, 8%]); max fixture deviation {worst_fixture:.1e} (tol 1e-4)",
            100.0 * size
        ),
    )
}

fn fixture_deviation() -> f64 {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/statsmodels_reference.json");
    let reference: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let floats = |v: &Value| -> Vec<f64> { v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };
    let mut worst: f64 = 0.0;
    for case in reference["adf"].as_array().unwrap() {
        let r = adf_test_with_maxlag(&floats(&case["series"]), case["maxlag"].as_u64().unwrap() as usize).unwrap();
        worst = worst
            .max((r.statistic - case["statistic"].as_f64().unwrap()).abs())
            .max((r.p_value - case["p_value"].as_f64().unwrap()).abs());
    }
    for case in reference["granger"].as_array().unwrap() {
        let (x, y) = (floats(&case["x"]), floats(&case["y"]));
        for lag in case["by_lag"].as_array().unwrap() {
            let r = granger_test_at_lag(&x, &y, lag["lag"].as_u64().unwrap() as usize).unwrap();
            worst = worst
                .max((r.f_statistic - lag["f_statistic"].as_f64().unwrap()).abs())
                .max((r.p_value - lag["p_value"].as_f64().unwrap()).abs());
        }
    }
    worst
}

/// Directory holding `guangzhou_weather.csv` and `sao_paulo_weather.csv`.
const CITY_DATA_ENV: &str = "HEATLIGHT_CITY_DATA";

fn real_city_counts() -> Outcome {
    let Some(dir) = std::env::var_os(CITY_DATA_ENV).map(PathBuf::from) else {
        return (true, format!("SKIP: set {CITY_DATA_ENV} to a directory with guangzhou_weather.csv and sao_paulo_weather.csv"));
    };
    let first = NaiveDate::from_ymd_opt(2013, 2, 15).unwrap();
    let last = NaiveDate::from_ymd_opt(2019, 10, 21).unwrap();
    let cases = [
        ("guangzhou", 0.80, 3, 294),
        ("guangzhou", 0.80, 4, 220),
        ("sao_paulo", 0.90, 3, 92),
        ("sao_paulo", 0.90, 4, 63),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (city, p, d, published) in cases {
        let path = dir.join(format!("{city}_weather.csv"));
        if !Path::new(&path).is_file() {
            return (true, format!("SKIP: {} not found", path.display()));
        }
        let mut rows = load_weather_csv(&path, &WeatherSchema::default()).unwrap().records;
        rows.retain(|w| w.date >= first && w.date <= last);
        rows.sort_by_key(|w| w.date);
        let dates: Vec<NaiveDate> = rows.iter().map(|w| w.date).collect();
        let temps: Vec<f64> = rows.iter().map(|w| w.temperature(TemperatureColumn::TempAvg)).collect();
        let count = detect(&dates, &temps, p, d).unwrap().1.treated_days();
        let ok = (count as f64 - published as f64).abs() <= 0.05 * published as f64;
        pass &= ok;
        parts.push(format!("{city} p={p} d={d}: {count} vs {published}"));
    }
    (pass, format!("{} (tol ±5%)", parts.join(", ")))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = common::two_city_run(dir.path());
    for out in ["first", "second"] {
        let o = common::heatlight(&["--config", run.to_str().unwrap(), "--out", out, "--seed", "42", "pipeline"], dir.path());
        assert!(o.status.success(), "{}", common::stderr(&o));
    }
    let a = common::snapshot(&dir.path().join("first"));
    let b = common::snapshot(&dir.path().join("second"));
    (a == b && !a.is_empty(), format!("{} report files compared, identical: {}", a.len(), a == b))
}
