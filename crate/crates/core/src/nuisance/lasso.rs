//! L1-penalised least squares by cyclic coordinate descent.
//!
//! Columns are centred and scaled to unit (population) variance before
//! fitting and the intercept is left unpenalised. The objective on the
//! standardised design is
//!
//! ```text
//! (1 / 2n) · ‖y − ȳ − Xβ‖² + λ · ‖β‖₁
//! ```
//!
//! so `λ_max = maxⱼ |⟨xⱼ, y − ȳ⟩| / n` is the smallest penalty with an
//! all-zero solution. Sweeps use covariance updates: the Gram matrix
//! `XᵀX / n` is formed once per fit and each coordinate step costs O(p).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dml::make_folds;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoParams {
    /// Explicit penalty grid. When absent, `n_lambda` values are spaced
    /// log-uniformly from `λ_max` down to `lambda_min_ratio · λ_max`.
    pub lambda_grid: Option<Vec<f64>>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub cv_folds: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        Self {
            lambda_grid: None,
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            cv_folds: 10,
            tol: 1e-7,
            max_sweeps: 10_000,
        }
    }
}

impl LassoParams {
    pub fn validate(&self) -> Result<()> {
        if self.cv_folds < 2 {
            return Err(Error::Argument("lasso cv_folds must be at least 2".into()));
        }
        if self.n_lambda < 1 || !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio <= 1.0) {
            return Err(Error::Argument("lasso grid needs n_lambda ≥ 1 and 0 < lambda_min_ratio ≤ 1".into()));
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                return Err(Error::Argument("lambda grid must be non-empty and non-negative".into()));
            }
        }
        if !(self.tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::Argument("lasso tol and max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ColumnScaling {
    pub fn identity(p: usize) -> Self {
        Self {
            center: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut center = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            center.push(mean);
            // constant columns stay at zero after centring
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { center, scale }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (c, s) = (self.center[j], self.scale[j]);
            col.apply(|v| *v = (*v - c) / s);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    /// Coefficients on the standardised columns.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub column_scaling: ColumnScaling,
    /// `(λ, mean held-out MSE)` for each grid value, when chosen by CV.
    pub cv_path: Vec<(f64, f64)>,
}

impl LassoModel {
    /// Coefficients and intercept on the original column scale.
    pub fn original_scale(&self) -> (Vec<f64>, f64) {
        let s = &self.column_scaling;
        let beta: Vec<f64> = self.coefficients.iter().zip(&s.scale).map(|(b, sc)| b / sc).collect();
        let shift: f64 = beta.iter().zip(&s.center).map(|(b, c)| b * c).sum();
        (beta, self.intercept - shift)
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Sufficient statistics of one standardised training set.
struct Problem {
    p: usize,
    /// XᵀX / n, column-major p×p.
    gram: Vec<f64>,
    /// Xᵀ(y − ȳ) / n
    xty: Vec<f64>,
    /// ‖y − ȳ‖² / n
    yy: f64,
    y_mean: f64,
    scaling: ColumnScaling,
}

impl Problem {
    fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let scaling = ColumnScaling::fit(x);
        let mut xs = scaling.apply(x);
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            let first = x[(0, j)];
            if x.column(j).iter().all(|&v| v == first) {
                col.fill(0.0);
            }
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let nf = n as f64;
        let gram_m = xs.tr_mul(&xs) / nf;
        let xty = (0..p)
            .map(|j| xs.column(j).iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() / nf)
            .collect();
        Self {
            p,
            gram: gram_m.as_slice().to_vec(),
            xty,
            yy: yc.iter().map(|v| v * v).sum::<f64>() / nf,
            y_mean,
            scaling,
        }
    }

    fn g(&self, i: usize, j: usize) -> f64 {
        self.gram[j * self.p + i]
    }

    fn lambda_max(&self) -> f64 {
        self.xty.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        let mut quad = 0.0;
        for j in 0..self.p {
            if beta[j] == 0.0 {
                continue;
            }
            for k in 0..self.p {
                quad += beta[j] * self.g(j, k) * beta[k];
            }
        }
        let lin: f64 = beta.iter().zip(&self.xty).map(|(b, c)| b * c).sum();
        0.5 * (self.yy - 2.0 * lin + quad) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }
}

/// Per-sweep objective values, for convergence diagnostics.
#[derive(Debug, Clone, Default)]
pub struct SweepTrace {
    pub objective: Vec<f64>,
}

/// Coordinate descent from `beta` (warm start) at a single penalty. `grad`
/// must hold `G·beta` on entry and is kept in sync.
fn descend(
    prob: &Problem,
    lambda: f64,
    beta: &mut [f64],
    grad: &mut [f64],
    params: &LassoParams,
    mut trace: Option<&mut SweepTrace>,
) -> usize {
    let p = prob.p;
    for sweep in 1..=params.max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let gjj = prob.g(j, j);
            if gjj <= 0.0 {
                continue;
            }
            let z = prob.xty[j] - grad[j] + gjj * beta[j];
            let new = soft_threshold(z, lambda) / gjj;
            let delta = new - beta[j];
            if delta != 0.0 {
                beta[j] = new;
                let col = &prob.gram[j * p..(j + 1) * p];
                for (g, c) in grad.iter_mut().zip(col) {
                    *g += delta * c;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.objective.push(prob.objective(beta, lambda));
        }
        if max_delta < params.tol {
            return sweep;
        }
    }
    log::warn!("lasso did not converge in {} sweeps at lambda {lambda}", params.max_sweeps);
    params.max_sweeps
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Validation(format!("{} rows for {} responses", x.nrows(), y.len())));
    }
    if x.nrows() == 0 {
        return Err(Error::InsufficientData("no rows to fit".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite entries in lasso inputs".into()));
    }
    Ok(())
}

fn model(prob: &Problem, beta: Vec<f64>, lambda: f64, cv_path: Vec<(f64, f64)>) -> LassoModel {
    LassoModel {
        coefficients: beta,
        intercept: prob.y_mean,
        lambda,
        column_scaling: prob.scaling.clone(),
        cv_path,
    }
}

/// Fits at one fixed penalty, optionally recording the objective per sweep.
pub fn fit_lasso_at(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    params: &LassoParams,
    trace: Option<&mut SweepTrace>,
) -> Result<LassoModel> {
    check_inputs(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!("lambda must be non-negative, got {lambda}")));
    }
    let prob = Problem::new(x, y);
    let mut beta = vec![0.0; prob.p];
    let mut grad = vec![0.0; prob.p];
    if prob.yy > 0.0 {
        descend(&prob, lambda, &mut beta, &mut grad, params, trace);
    }
    Ok(model(&prob, beta, lambda, Vec::new()))
}

/// Largest useful penalty for `(x, y)` after standardisation.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    Ok(Problem::new(x, y).lambda_max())
}

fn decreasing_grid(prob: &Problem, params: &LassoParams) -> Vec<f64> {
    match &params.lambda_grid {
        Some(g) => {
            let mut g = g.clone();
            g.sort_by(|a, b| b.total_cmp(a));
            g
        }
        None => {
            let top = prob.lambda_max();
            let k = params.n_lambda;
            if k == 1 {
                return vec![top];
            }
            (0..k)
                .map(|i| top * params.lambda_min_ratio.powf(i as f64 / (k - 1) as f64))
                .collect()
        }
    }
}

/// Solutions along a decreasing grid, warm-started from the previous one.
fn path(prob: &Problem, grid: &[f64], params: &LassoParams) -> Vec<Vec<f64>> {
    let mut beta = vec![0.0; prob.p];
    let mut grad = vec![0.0; prob.p];
    grid.iter()
        .map(|&lambda| {
            if prob.yy > 0.0 {
                descend(prob, lambda, &mut beta, &mut grad, params, None);
            }
            beta.clone()
        })
        .collect()
}

fn predict_with(scaling: &ColumnScaling, intercept: f64, beta: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|r| {
            intercept
                + beta
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| **b != 0.0)
                    .map(|(j, b)| b * (x[(r, j)] - scaling.center[j]) / scaling.scale[j])
                    .sum::<f64>()
        })
        .collect()
}

/// Chooses λ on the grid by K-fold cross-validated MSE (minimum rule), then
/// refits on all rows.
pub fn fit_lasso(x: &DMatrix<f64>, y: &[f64], params: &LassoParams, seed: u64) -> Result<LassoModel> {
    params.validate()?;
    check_inputs(x, y)?;
    let n = x.nrows();
    if n < params.cv_folds {
        return Err(Error::InsufficientData(format!(
            "{n} rows for {}-fold lasso cross-validation",
            params.cv_folds
        )));
    }
    let full = Problem::new(x, y);
    if full.yy == 0.0 {
        return Ok(model(&full, vec![0.0; full.p], 0.0, Vec::new()));
    }
    let grid = decreasing_grid(&full, params);
    let mut cv_path = Vec::new();
    let mut chosen = 0;
    if grid.len() > 1 {
        let folds = make_folds(n, params.cv_folds, seed)?;
        let mut sse = vec![0.0; grid.len()];
        for k in 0..params.cv_folds {
            let (train, test) = folds.split(k);
            let xt = x.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&r| y[r]).collect();
            let prob = Problem::new(&xt, &yt);
            let xv = x.select_rows(&test);
            for (i, beta) in path(&prob, &grid, params).iter().enumerate() {
                let pred = predict_with(&prob.scaling, prob.y_mean, beta, &xv);
                sse[i] += test.iter().zip(&pred).map(|(&r, p)| (y[r] - p).powi(2)).sum::<f64>();
            }
        }
        // strict < keeps the larger penalty on ties
        for i in 1..grid.len() {
            if sse[i] < sse[chosen] {
                chosen = i;
            }
        }
        cv_path = grid.iter().zip(&sse).map(|(&l, s)| (l, s / n as f64)).collect();
    }
    let betas = path(&full, &grid[..=chosen], params);
    Ok(model(&full, betas[chosen].clone(), grid[chosen], cv_path))
}

pub fn predict_lasso(model: &LassoModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.coefficients.len() {
        return Err(Error::Validation(format!(
            "lasso fitted on {} columns, got {}",
            model.coefficients.len(),
            x.ncols()
        )));
    }
    Ok(predict_with(&model.column_scaling, model.intercept, &model.coefficients, x))
}
