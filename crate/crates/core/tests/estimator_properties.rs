//! Behaviour of the cross-fitted estimator on synthetic data with known
//! structure.

use heatlight::diagnostics::{sweep, SweepOptions};
use heatlight::dml::{cross_fit_residuals, make_folds, run_dml};
use heatlight::features::{FeatureMatrix, FeatureSpec};
use heatlight::ingest::join_on_date;
use heatlight::nuisance::{ForestParams, LassoParams, LearnerSpec, NuisanceConfig};
use heatlight::synth::{generate, generate_city, SynthCityConfig, SynthConfig};
use heatlight::types::{CityConfig, TemperatureColumn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quick_config(seed: u64) -> CityConfig {
    CityConfig {
        seed,
        learners: NuisanceConfig::default().with_trees(50),
        ..CityConfig::default()
    }
}

fn synthetic(n_days: usize, seed: u64) -> FeatureMatrix {
    generate(&SynthConfig {
        n_days,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
    .0
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn linear_outcome_leaves_near_zero_residuals() {
    let base = synthetic(600, 4);
    let beta = [1.5, -0.7, 0.0, 2.0, 0.3, 0.0, 0.0, -1.1, 0.0, 0.5];
    let y: Vec<f64> = (0..base.nrows())
        .map(|r| 1.0 + (0..base.ncols()).map(|c| beta[c] * base.x[(r, c)]).sum::<f64>())
        .collect();
    let fm = FeatureMatrix::new(base.dates.clone(), base.column_names.clone(), base.x.clone(), base.d.clone(), y.clone()).unwrap();
    let folds = make_folds(fm.nrows(), 5, 1).unwrap();
    let res = cross_fit_residuals(&fm, &folds, &NuisanceConfig::default().with_trees(20), 2).unwrap();
    let rms = (res.y_tilde.iter().map(|v| v * v).sum::<f64>() / res.len() as f64).sqrt();
    assert!(rms < 0.01 * sd(&y), "residual rms {rms} against outcome sd {}", sd(&y));
}

#[test]
fn held_out_predictions_never_see_their_own_row() {
    let base = synthetic(300, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise: Vec<f64> = (0..base.nrows()).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)).collect();
    let fm = FeatureMatrix::new(base.dates.clone(), base.column_names.clone(), base.x.clone(), base.d.clone(), noise.clone()).unwrap();
    // A forest of unpruned trees on all rows reproduces its training targets
    // exactly, so in-sample residuals would vanish.
    let memoriser = LearnerSpec::Forest(ForestParams {
        n_trees: 5,
        mtry: Some(fm.ncols()),
        min_node: 1,
        bootstrap: false,
        max_depth: None,
    });
    let learners = NuisanceConfig {
        outcome: memoriser.clone(),
        treatment: memoriser,
    };
    let folds = make_folds(fm.nrows(), 5, 9).unwrap();
    let res = cross_fit_residuals(&fm, &folds, &learners, 10).unwrap();
    assert!(sd(&res.y_tilde) > 0.8 * sd(&noise), "{} vs {}", sd(&res.y_tilde), sd(&noise));

    assert_eq!(res.training_rows.len(), 5);
    for (k, train) in res.training_rows.iter().enumerate() {
        let held_out = res.fold_of.iter().filter(|&&f| f == k).count();
        assert_eq!(train.len() + held_out, fm.nrows());
        assert!(train.iter().all(|&r| res.fold_of[r] != k));
    }
}

#[test]
fn fold_count_barely_moves_the_estimate() {
    let fm = synthetic(1000, 21);
    let two = run_dml(&fm, &CityConfig { k_folds: 2, ..quick_config(5) }).unwrap();
    let ten = run_dml(&fm, &CityConfig { k_folds: 10, ..quick_config(5) }).unwrap();
    assert!((two.theta - ten.theta).abs() < 2.0 * ten.se, "K=2 {} vs K=10 {} (se {})", two.theta, ten.theta, ten.se);
}

#[test]
fn row_order_does_not_matter() {
    let fm = synthetic(400, 13);
    let config = quick_config(17);
    let reference = run_dml(&fm, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..3 {
        let mut rows: Vec<usize> = (0..fm.nrows()).collect();
        rows.shuffle(&mut rng);
        let est = run_dml(&fm.select_rows(&rows), &config).unwrap();
        assert_eq!(est.theta.to_bits(), reference.theta.to_bits());
        assert_eq!(est.se.to_bits(), reference.se.to_bits());
    }
}

fn effect_city(seed: u64) -> heatlight::types::CityDataset {
    let city = generate_city(&SynthCityConfig {
        effect: 0.2,
        effect_temperature: TemperatureColumn::TempMax,
        seed,
        ..SynthCityConfig::default()
    })
    .unwrap();
    join_on_date(&city.weather, &city.ntl).unwrap().0
}

fn effect_sweep_config(seed: u64) -> CityConfig {
    CityConfig {
        seed,
        temperature: TemperatureColumn::TempMax,
        feature_spec: FeatureSpec::without_treatment_interactions(),
        learners: NuisanceConfig::default().with_trees(50),
        ..CityConfig::default()
    }
}

/// The effect sits on days closing a run of three or more hot days. Every
/// such day is also a two-day heatwave day, so the shorter definition picks
/// up a diluted effect rather than none; the sharp signal is at d = 3.
#[test]
fn sweep_concentrates_the_effect_at_its_true_duration() {
    let options = SweepOptions {
        p_grid: vec![0.8],
        d_grid: vec![2, 3],
        ..SweepOptions::default()
    };
    for seed in 0..2 {
        let result = sweep(&effect_city(seed), &effect_sweep_config(seed), &options).unwrap();
        let d2 = result.cell(0.8, 2).unwrap().estimate.clone().unwrap();
        let d3 = result.cell(0.8, 3).unwrap().estimate.clone().unwrap();
        assert!(d3.z > 2.0, "seed {seed}: d=3 z {}", d3.z);
        assert!(d3.z > d2.z && d3.theta > d2.theta, "seed {seed}: d=2 {d2:?} d=3 {d3:?}");
        assert!((d3.theta - 0.2).abs() < 0.1, "seed {seed}: d=3 theta {}", d3.theta);
    }
}

#[test]
fn sweep_is_deterministic() {
    let options = SweepOptions {
        p_grid: vec![0.8, 0.9],
        d_grid: vec![3],
        ..SweepOptions::default()
    };
    let dataset = effect_city(7);
    let a = sweep(&dataset, &effect_sweep_config(7), &options).unwrap();
    let b = sweep(&dataset, &effect_sweep_config(7), &options).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lasso_outcome_and_forest_treatment_are_the_defaults() {
    let learners = NuisanceConfig::default();
    assert_eq!(learners.outcome, LearnerSpec::Lasso(LassoParams::default()));
    assert_eq!(learners.treatment, LearnerSpec::Forest(ForestParams::default()));
}
