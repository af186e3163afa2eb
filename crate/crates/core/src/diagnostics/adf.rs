//! Augmented Dickey-Fuller unit-root test with a constant.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::ols;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lags_used: usize,
    pub nobs: usize,
}

/// One-sided 5% normal critical value used to trim the lag order.
const LAG_STOP: f64 = 1.644_853_626_951_472_2;

/// Schwert's rule `⌊12·(n/100)^{1/4}⌋`, capped so the largest regression
/// keeps enough degrees of freedom.
pub fn schwert_maxlag(n: usize) -> usize {
    let rule = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    rule.min((n / 2).saturating_sub(2))
}

/// Regression of Δx_t on [x_{t−1}, Δx_{t−1..t−lags}, 1] over the last `nobs`
/// differences.
fn adf_design(x: &[f64], lags: usize, nobs: usize) -> (DMatrix<f64>, Vec<f64>) {
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let first = dx.len() - nobs;
    let design = DMatrix::from_fn(nobs, lags + 2, |r, c| {
        let t = first + r;
        match c {
            0 => x[t],
            c if c <= lags => dx[t - c],
            _ => 1.0,
        }
    });
    (design, dx[first..].to_vec())
}

pub fn adf_test(series: &[f64]) -> Result<AdfResult> {
    let n = series.len();
    if n < 20 {
        return Err(Error::InsufficientData(format!("ADF needs at least 20 points, got {n}")));
    }
    adf_test_with_maxlag(series, schwert_maxlag(n))
}

/// Lag order is found by testing the last lag for significance, from
/// `maxlag` down, on a common sample; the chosen model is then refit on all
/// usable observations.
pub fn adf_test_with_maxlag(series: &[f64], maxlag: usize) -> Result<AdfResult> {
    let n = series.len();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in series".into()));
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    if n < maxlag + 4 + maxlag {
        return Err(Error::InsufficientData(format!("{n} points cannot support {maxlag} lags")));
    }
    let common = n - 1 - maxlag;
    let mut lags = 0;
    for l in (1..=maxlag).rev() {
        let (x, y) = adf_design(series, l, common);
        let fit = ols(&x, &y)?;
        if fit.t_values()[l].abs() >= LAG_STOP {
            lags = l;
            break;
        }
    }
    let nobs = n - 1 - lags;
    let (x, y) = adf_design(series, lags, nobs);
    let fit = ols(&x, &y)?;
    let statistic = fit.t_values()[0];
    Ok(AdfResult {
        statistic,
        p_value: mackinnon_p(statistic),
        lags_used: lags,
        nobs,
    })
}

/// MacKinnon (1994) response-surface p-value, constant-only case, one series.
pub fn mackinnon_p(stat: f64) -> f64 {
    const TAU_MAX: f64 = 2.74;
    const TAU_MIN: f64 = -18.83;
    const TAU_STAR: f64 = -1.61;
    const SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
    const LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];
    if stat > TAU_MAX {
        return 1.0;
    }
    if stat < TAU_MIN {
        return 0.0;
    }
    let coef: &[f64] = if stat <= TAU_STAR { &SMALL_P } else { &LARGE_P };
    let z = coef.iter().rev().fold(0.0, |acc, c| acc * stat + c);
    Normal::new(0.0, 1.0).expect("standard normal").cdf(z)
}
