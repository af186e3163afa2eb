//! Granger causality F-test: do lags of `x` help predict `y` beyond the
//! lags of `y` itself?

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::linalg::ols;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrangerResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub lag_used: usize,
    pub df_num: usize,
    pub df_denom: usize,
}

/// Rows `first..n` of `[1, y_{t−1..t−lags}, x_{t−1..t−lags}]`, the x block
/// only when `with_x`.
fn lag_design(y: &[f64], x: Option<&[f64]>, lags: usize, first: usize) -> DMatrix<f64> {
    let rows = y.len() - first;
    let cols = 1 + lags * if x.is_some() { 2 } else { 1 };
    DMatrix::from_fn(rows, cols, |r, c| {
        let t = first + r;
        match c {
            0 => 1.0,
            c if c <= lags => y[t - c],
            c => x.expect("x block")[t - (c - lags)],
        }
    })
}

/// Lag order minimising AIC of the autoregression of `y` on its own lags,
/// fitted on a sample common to every candidate order. Ties go to the
/// shorter lag.
pub fn select_lag_aic(y: &[f64], max_lag: usize) -> Result<usize> {
    let nc = y.len() - max_lag;
    let target = &y[max_lag..];
    let mut best: Option<(usize, f64)> = None;
    for lag in 1..=max_lag {
        let fit = ols(&lag_design(y, None, lag, max_lag), target)?;
        let aic = nc as f64 * (fit.rss / nc as f64).ln() + 2.0 * (lag + 1) as f64;
        if best.is_none_or(|(_, b)| aic < b) {
            best = Some((lag, aic));
        }
    }
    Ok(best.expect("max_lag >= 1").0)
}

fn check_inputs(x: &[f64], y: &[f64], lag: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!("x has {} points, y has {}", x.len(), y.len())));
    }
    if lag < 1 {
        return Err(Error::Argument("lag must be at least 1".into()));
    }
    if x.len() <= 3 * lag {
        return Err(Error::InsufficientData(format!(
            "{} points for lag {lag}; need more than {}",
            x.len(),
            3 * lag
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in series".into()));
    }
    Ok(())
}

/// F-test at a fixed lag on the sample `t = lag..n`.
pub fn granger_test_at_lag(x: &[f64], y: &[f64], lag: usize) -> Result<GrangerResult> {
    check_inputs(x, y, lag)?;
    let target = &y[lag..];
    let restricted = ols(&lag_design(y, None, lag, lag), target)?;
    let unrestricted = ols(&lag_design(y, Some(x), lag, lag), target).map_err(|e| match e {
        Error::Singular(_) => Error::Singular("lags of x are collinear with the restricted model".into()),
        e => e,
    })?;
    let df_denom = unrestricted.df_resid;
    let f = ((restricted.rss - unrestricted.rss) / lag as f64) / (unrestricted.rss / df_denom as f64);
    let dist = FisherSnedecor::new(lag as f64, df_denom as f64)
        .map_err(|e| Error::Degenerate(format!("F distribution: {e}")))?;
    Ok(GrangerResult {
        f_statistic: f,
        p_value: dist.sf(f.max(0.0)),
        lag_used: lag,
        df_num: lag,
        df_denom,
    })
}

/// Selects the lag by AIC up to `max_lag`, then tests at that lag.
pub fn granger_test(x: &[f64], y: &[f64], max_lag: usize) -> Result<GrangerResult> {
    check_inputs(x, y, max_lag)?;
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::Singular("x is constant".into()));
    }
    let lag = select_lag_aic(y, max_lag)?;
    granger_test_at_lag(x, y, lag)
}
