//! Nuisance learners for the outcome model `g(X)` and treatment model `m(X)`.
//!
//! Both learners sit behind [`Learner`] so either role can be filled by
//! either model.

pub mod forest;
pub mod lasso;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use forest::{fit_forest, predict_forest, ForestModel, ForestParams};
pub use lasso::{fit_lasso, predict_lasso, soft_threshold, LassoModel, LassoParams};

use crate::error::Result;

pub trait Learner: Send + Sync {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<FittedModel>;
}

/// A fitted nuisance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Lasso(LassoModel),
    Forest(ForestModel),
}

impl FittedModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            FittedModel::Lasso(m) => predict_lasso(m, x),
            FittedModel::Forest(m) => predict_forest(m, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Lasso(LassoParams),
    Forest(ForestParams),
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Lasso(p) => p.validate(),
            LearnerSpec::Forest(p) => p.validate(),
        }
    }

    /// Rows a training set needs for this learner to fit.
    pub fn min_rows(&self) -> usize {
        match self {
            LearnerSpec::Lasso(p) => p.cv_folds,
            LearnerSpec::Forest(_) => 1,
        }
    }
}

impl Learner for LearnerSpec {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<FittedModel> {
        match self {
            LearnerSpec::Lasso(p) => fit_lasso(x, y, p, seed).map(FittedModel::Lasso),
            LearnerSpec::Forest(p) => fit_forest(x, y, p, seed).map(FittedModel::Forest),
        }
    }
}

/// Learner assignment: Lasso for the outcome, random forest for the treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuisanceConfig {
    pub outcome: LearnerSpec,
    pub treatment: LearnerSpec,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            outcome: LearnerSpec::Lasso(LassoParams::default()),
            treatment: LearnerSpec::Forest(ForestParams::default()),
        }
    }
}

impl NuisanceConfig {
    pub fn validate(&self) -> Result<()> {
        self.outcome.validate()?;
        self.treatment.validate()
    }

    /// Same learners with a smaller forest, for quick runs.
    pub fn with_trees(mut self, n_trees: usize) -> Self {
        for spec in [&mut self.outcome, &mut self.treatment] {
            if let LearnerSpec::Forest(p) = spec {
                p.n_trees = n_trees;
            }
        }
        self
    }
}
