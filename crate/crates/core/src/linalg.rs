use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordinary least squares with classical standard errors.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub rss: f64,
    pub nobs: usize,
    pub df_resid: usize,
}

impl OlsFit {
    pub fn t_values(&self) -> Vec<f64> {
        self.coef.iter().zip(&self.se).map(|(b, s)| b / s).collect()
    }
}

/// Relative threshold on the diagonal of R below which the design is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Validation(format!("{n} design rows for {} responses", y.len())));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!("{n} observations for {k} regressors")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
        return Err(Error::Singular("collinear regressors".into()));
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let resid = &yv - x * &coef;
    let rss = resid.norm_squared();
    let df_resid = n - k;
    let sigma2 = rss / df_resid as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular("triangular inverse failed".into()))?;
    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ, so its diagonal is the squared row norms of R⁻¹.
    let se = (0..k).map(|i| (r_inv.row(i).norm_squared() * sigma2).sqrt()).collect();
    Ok(OlsFit {
        coef: coef.iter().copied().collect(),
        se,
        rss,
        nobs: n,
        df_resid,
    })
}
