//! Cross-fitted double machine learning for the partially linear model
//! `Y = θ·D + g(X) + ε`, `D = m(X) + ν`.
//!
//! Rows are split into K folds. For every fold the outcome and treatment
//! learners are trained on the other K−1 folds and used to residualise the
//! held-out rows. θ is the no-intercept slope of the outcome residuals on
//! the treatment residuals, with a heteroskedasticity-robust standard error
//! from the orthogonal score.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::nuisance::{Learner, NuisanceConfig};
use crate::types::CityConfig;

/// Mixes a base seed with a tag into an independent-looking 64-bit seed
/// (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    /// `(training rows, held-out rows)` for fold `k`, both ascending.
    pub fn split(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&r| self.fold_of[r] != k)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Uniformly random balanced partition of `0..n` into `k` folds.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Argument(format!("{k} folds for {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % k;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub y_tilde: Vec<f64>,
    pub d_tilde: Vec<f64>,
    /// Fold each row was held out in.
    pub fold_of: Vec<usize>,
    /// Rows used to train the models of each fold.
    pub training_rows: Vec<Vec<usize>>,
}

impl ResidualSet {
    pub fn from_residuals(y_tilde: Vec<f64>, d_tilde: Vec<f64>) -> Result<Self> {
        if y_tilde.len() != d_tilde.len() {
            return Err(Error::Validation(format!(
                "{} outcome residuals for {} treatment residuals",
                y_tilde.len(),
                d_tilde.len()
            )));
        }
        let n = y_tilde.len();
        Ok(Self {
            y_tilde,
            d_tilde,
            fold_of: vec![0; n],
            training_rows: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.y_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_tilde.is_empty()
    }
}

pub fn cross_fit_residuals(
    fm: &FeatureMatrix,
    folds: &FoldAssignment,
    learners: &NuisanceConfig,
    seed: u64,
) -> Result<ResidualSet> {
    let n = fm.nrows();
    if folds.fold_of.len() != n {
        return Err(Error::Validation(format!(
            "fold assignment covers {} rows, feature matrix has {n}",
            folds.fold_of.len()
        )));
    }
    learners.validate()?;
    let need = learners.outcome.min_rows().max(learners.treatment.min_rows());
    let mut y_tilde = vec![f64::NAN; n];
    let mut d_tilde = vec![f64::NAN; n];
    let mut training_rows = Vec::with_capacity(folds.k);
    for k in 0..folds.k {
        let (train, test) = folds.split(k);
        if train.len() < need {
            return Err(Error::InsufficientData(format!(
                "fold {k} leaves {} training rows, learners need {need}",
                train.len()
            )));
        }
        let x_train = fm.x.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&r| fm.y[r]).collect();
        let d_train: Vec<f64> = train.iter().map(|&r| fm.d[r]).collect();
        let x_test = fm.x.select_rows(&test);
        let g = learners.outcome.fit(&x_train, &y_train, derive_seed(seed, 2 * k as u64))?;
        let m = learners
            .treatment
            .fit(&x_train, &d_train, derive_seed(seed, 2 * k as u64 + 1))?;
        let g_hat = g.predict(&x_test)?;
        let m_hat = m.predict(&x_test)?;
        for (i, &r) in test.iter().enumerate() {
            y_tilde[r] = fm.y[r] - g_hat[i];
            d_tilde[r] = fm.d[r] - m_hat[i];
        }
        training_rows.push(train);
    }
    Ok(ResidualSet {
        y_tilde,
        d_tilde,
        fold_of: folds.fold_of.clone(),
        training_rows,
    })
}

fn check_treatment_variation(res: &ResidualSet) -> Result<f64> {
    let sdd: f64 = res.d_tilde.iter().map(|d| d * d).sum();
    if !(sdd > f64::EPSILON * res.len() as f64) {
        return Err(Error::Degenerate("treatment fully explained by covariates".into()));
    }
    Ok(sdd)
}

/// `θ̂ = (Σ D̃²)⁻¹ Σ D̃·Ỹ`
pub fn estimate_theta(res: &ResidualSet) -> Result<f64> {
    let sdd = check_treatment_variation(res)?;
    let sdy: f64 = res.d_tilde.iter().zip(&res.y_tilde).map(|(d, y)| d * y).sum();
    Ok(sdy / sdd)
}

/// Influence-function standard error:
/// `σ̂² = [n⁻¹ΣD̃²]⁻² · n⁻¹Σ(D̃·(Ỹ − θD̃))²`, `SE = σ̂/√n`.
pub fn standard_error(res: &ResidualSet, theta: f64) -> Result<f64> {
    let n = res.len();
    if n < 2 {
        return Err(Error::InsufficientData("standard error needs at least 2 rows".into()));
    }
    let sdd = check_treatment_variation(res)?;
    let nf = n as f64;
    let j = sdd / nf;
    let psi2: f64 = res
        .d_tilde
        .iter()
        .zip(&res.y_tilde)
        .map(|(d, y)| (d * (y - theta * d)).powi(2))
        .sum::<f64>()
        / nf;
    Ok((psi2 / (j * j) / nf).sqrt())
}

/// Log-point effect as a percentage change in the outcome level.
pub fn to_percent(theta: f64) -> f64 {
    theta.exp_m1() * 100.0
}

/// Two-sided normal tail probability of `θ / se`.
pub fn p_value(theta: f64, se: f64) -> Result<f64> {
    if !(se > 0.0) {
        return Err(Error::Argument(format!("standard error must be positive, got {se}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((2.0 * normal.cdf(-(theta / se).abs())).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlEstimate {
    pub city: String,
    pub p: f64,
    pub d: usize,
    pub theta: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub pct_change: f64,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
}

impl DmlEstimate {
    pub fn from_theta_se(theta: f64, se: f64, n: usize, config: &CityConfig) -> Result<Self> {
        Ok(Self {
            city: config.city_name.clone(),
            p: config.percentile_p,
            d: config.duration_d,
            theta,
            se,
            z: theta / se,
            p_value: p_value(theta, se)?,
            pct_change: to_percent(theta),
            n,
            k: config.k_folds,
            seed: config.seed,
        })
    }

    /// Normal-approximation confidence interval at the given two-sided level.
    pub fn confidence_interval(&self, level: f64) -> (f64, f64) {
        let q = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + level / 2.0);
        (self.theta - q * self.se, self.theta + q * self.se)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// One cross-fitting pass: residuals, θ̂ and its standard error.
pub fn dml_once(fm: &FeatureMatrix, config: &CityConfig, repetition: u64) -> Result<(ResidualSet, f64, f64)> {
    let base = derive_seed(config.seed, repetition);
    let folds = make_folds(fm.nrows(), config.k_folds, base)?;
    let res = cross_fit_residuals(fm, &folds, &config.learners, derive_seed(base, u64::MAX))?;
    let theta = estimate_theta(&res)?;
    let se = standard_error(&res, theta)?;
    Ok((res, theta, se))
}

/// Full estimation for one `(p, d)` configuration. Rows are processed in
/// date order, so the estimate does not depend on the input row order.
/// With several repetitions the median θ̂ is reported together with the
/// median of `√(se_r² + (θ_r − θ̂)²)`.
pub fn run_dml(fm: &FeatureMatrix, config: &CityConfig) -> Result<DmlEstimate> {
    config.validate()?;
    let mut order: Vec<usize> = (0..fm.nrows()).collect();
    order.sort_by_key(|&r| fm.dates[r]);
    let sorted;
    let fm = if order.windows(2).all(|w| w[0] < w[1]) {
        fm
    } else {
        sorted = fm.select_rows(&order);
        &sorted
    };
    if fm.nrows() < config.k_folds {
        return Err(Error::Argument(format!(
            "{} folds for {} rows",
            config.k_folds,
            fm.nrows()
        )));
    }
    let mut runs = Vec::with_capacity(config.repetitions);
    for r in 0..config.repetitions {
        let (_, theta, se) = dml_once(fm, config, r as u64)?;
        runs.push((theta, se));
    }
    let (theta, se) = if runs.len() == 1 {
        runs[0]
    } else {
        let mut thetas: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let theta = median(&mut thetas);
        let mut spreads: Vec<f64> = runs
            .iter()
            .map(|(t, s)| (s * s + (t - theta).powi(2)).sqrt())
            .collect();
        (theta, median(&mut spreads))
    };
    DmlEstimate::from_theta_se(theta, se, fm.nrows(), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn singleton_folds() {
        let f = make_folds(10, 10, 3).unwrap();
        assert_eq!(f.sizes(), vec![1; 10]);
    }

    #[test]
    fn balanced_sizes() {
        let f = make_folds(103, 10, 7).unwrap();
        let mut sizes = f.sizes();
        sizes.sort();
        // 103 = 10·10 + 3: three folds get one extra row
        assert_eq!(sizes, [vec![10; 7], vec![11; 3]].concat());
    }

    #[test]
    fn folds_deterministic() {
        assert_eq!(make_folds(57, 5, 11).unwrap(), make_folds(57, 5, 11).unwrap());
        assert_ne!(make_folds(57, 5, 11).unwrap(), make_folds(57, 5, 12).unwrap());
        assert!(make_folds(5, 6, 0).is_err());
        assert!(make_folds(5, 1, 0).is_err());
    }

    fn res(y: &[f64], d: &[f64]) -> ResidualSet {
        ResidualSet::from_residuals(y.to_vec(), d.to_vec()).unwrap()
    }

    #[test]
    fn theta_cases() {
        let d = [0.3, -0.2, 0.5, -0.6];
        let y: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
        assert!((estimate_theta(&res(&y, &d)).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(estimate_theta(&res(&[3.0, 1.0], &[1.0, -1.0])).unwrap(), 1.0);
        assert_eq!(estimate_theta(&res(&[1.0, 1.0], &[1.0, -1.0])).unwrap(), 0.0);
        let err = estimate_theta(&res(&[1.0, 2.0], &[0.0, 0.0])).unwrap_err();
        assert!(err.to_string().contains("treatment fully explained by covariates"));
    }

    #[test]
    fn theta_matches_no_intercept_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = d.iter().map(|v| 0.7 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let theta = estimate_theta(&res(&y, &d)).unwrap();
        let x = nalgebra::DMatrix::from_column_slice(200, 1, &d);
        let slope = crate::linalg::ols(&x, &y).unwrap().coef[0];
        assert!((theta - slope).abs() < 1e-10);
    }

    #[test]
    fn exact_fit_has_zero_se() {
        let d = [0.3, -0.2, 0.5, -0.6];
        let y: Vec<f64> = d.iter().map(|v| 1.5 * v).collect();
        let r = res(&y, &d);
        let se = standard_error(&r, estimate_theta(&r).unwrap()).unwrap();
        assert!(se < 1e-12);
    }

    #[test]
    fn se_halves_when_rows_quadruple() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d: Vec<f64> = (0..300).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = d.iter().map(|v| 0.4 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let r1 = res(&y, &d);
        let se1 = standard_error(&r1, estimate_theta(&r1).unwrap()).unwrap();
        let r4 = res(&y.repeat(4), &d.repeat(4));
        let se4 = standard_error(&r4, estimate_theta(&r4).unwrap()).unwrap();
        assert!((se4 / se1 - 0.5).abs() < 0.005, "{}", se4 / se1);
    }

    #[test]
    fn se_is_calibrated_by_simulation() {
        // heteroskedastic residual pairs with known slope
        let reps = 500;
        let n = 400;
        let mut thetas = Vec::with_capacity(reps);
        let mut ses = Vec::with_capacity(reps);
        for s in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + s as u64);
            let d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let y: Vec<f64> = d
                .iter()
                .map(|v| 0.8 * v + (0.5 + v.abs()) * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let r = res(&y, &d);
            let t = estimate_theta(&r).unwrap();
            thetas.push(t);
            ses.push(standard_error(&r, t).unwrap());
        }
        let mean = thetas.iter().sum::<f64>() / reps as f64;
        let sd = (thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let mean_se = ses.iter().sum::<f64>() / reps as f64;
        assert!((sd / mean_se - 1.0).abs() < 0.15, "sd {sd} vs se {mean_se}");
    }

    #[test]
    fn percent_transform() {
        assert_eq!(to_percent(0.0), 0.0);
        for pct in [59.44, 14.04, 263.42, 72.95] {
            assert!((to_percent((1.0f64 + pct / 100.0).ln()) - pct).abs() < 1e-9);
        }
        assert!((to_percent(0.1) - 10.517).abs() < 1e-3);
    }

    #[test]
    fn p_values() {
        assert_eq!(p_value(0.0, 1.0).unwrap(), 1.0);
        assert!((p_value(0.1314, 0.0564).unwrap() - 0.0198).abs() < 5e-4);
        assert!((p_value(0.5478, 0.2384).unwrap() - 0.0216).abs() < 5e-4);
        assert!(p_value(1.0, 0.0).is_err());
        assert!(p_value(1.0, -1.0).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|t| derive_seed(42, t)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 100);
    }
}
