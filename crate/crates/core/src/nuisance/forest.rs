//! Random forest of regression trees grown on bootstrap resamples.
//!
//! Splits maximise the reduction in within-node sum of squares over `mtry`
//! features drawn per node. Every tree owns an RNG stream derived from the
//! forest seed and its index, so the fitted forest does not depend on how
//! many threads grew it.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `max(1, ⌊p/3⌋)`.
    pub mtry: Option<usize>,
    /// Minimum number of (in-bag) rows in a leaf.
    pub min_node: usize,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node: 5,
            bootstrap: true,
            max_depth: None,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::Argument("forest needs at least one tree".into()));
        }
        if self.min_node < 1 {
            return Err(Error::Argument("min_node must be at least 1".into()));
        }
        if self.mtry == Some(0) {
            return Err(Error::Argument("mtry must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or((n_features / 3).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[(row, feature)] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_trees: usize,
    pub mtry: usize,
    pub min_node: usize,
    pub seed: u64,
    pub n_features: usize,
}

impl ForestModel {
    /// Wraps prebuilt trees, e.g. for inspecting prediction averaging.
    pub fn from_trees(trees: Vec<Tree>, n_features: usize) -> Self {
        Self {
            n_trees: trees.len(),
            trees,
            mtry: n_features.max(1),
            min_node: 1,
            seed: 0,
            n_features,
        }
    }
}

struct Grower<'a> {
    x: &'a [f64],
    n: usize,
    p: usize,
    y: &'a [f64],
    mtry: usize,
    min_node: usize,
    max_depth: usize,
}

impl Grower<'_> {
    fn grow(&self, mut rows: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut stack = vec![(0usize, rows.len(), 0usize, 0usize)];
        let mut buf: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
        while let Some((lo, hi, depth, id)) = stack.pop() {
            let seg = &mut rows[lo..hi];
            let m = seg.len();
            let sum: f64 = seg.iter().map(|&r| self.y[r]).sum();
            let value = sum / m as f64;
            nodes[id] = Node::Leaf { value };
            let first = self.y[seg[0]];
            if m < 2 * self.min_node || depth >= self.max_depth || seg.iter().all(|&r| self.y[r] == first) {
                continue;
            }
            let parent = sum * sum / m as f64;
            let mut best: Option<(usize, f64, f64)> = None;
            for f in sample_indices(rng, self.p, self.mtry).into_iter() {
                let col = &self.x[f * self.n..(f + 1) * self.n];
                buf.clear();
                buf.extend(seg.iter().map(|&r| (col[r], self.y[r])));
                buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                let mut left = 0.0;
                for i in 0..m - 1 {
                    left += buf[i].1;
                    let nl = i + 1;
                    if nl < self.min_node {
                        continue;
                    }
                    let nr = m - nl;
                    if nr < self.min_node {
                        break;
                    }
                    if buf[i].0 == buf[i + 1].0 {
                        continue;
                    }
                    let right = sum - left;
                    let score = left * left / nl as f64 + right * right / nr as f64;
                    if best.is_none_or(|b| score > b.2) {
                        let (a, b) = (buf[i].0, buf[i + 1].0);
                        let mut thr = a + (b - a) / 2.0;
                        if thr >= b {
                            thr = a;
                        }
                        best = Some((f, thr, score));
                    }
                }
            }
            let Some((feature, threshold, score)) = best else { continue };
            if score <= parent + 1e-12 * parent.abs().max(1.0) {
                continue;
            }
            let col = &self.x[feature * self.n..(feature + 1) * self.n];
            // stable partition: left rows first
            let (l, r): (Vec<usize>, Vec<usize>) = seg.iter().partition(|&&row| col[row] <= threshold);
            let nl = l.len();
            seg[..nl].copy_from_slice(&l);
            seg[nl..].copy_from_slice(&r);
            let left_id = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[id] = Node::Split {
                feature,
                threshold,
                left: left_id,
                right: left_id + 1,
            };
            stack.push((lo + nl, hi, depth + 1, left_id + 1));
            stack.push((lo, lo + nl, depth + 1, left_id));
        }
        Tree { nodes }
    }
}

pub fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub fn fit_forest(x: &DMatrix<f64>, d: &[f64], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    params.validate()?;
    let (n, p) = x.shape();
    if d.len() != n {
        return Err(Error::Validation(format!("{n} rows for {} targets", d.len())));
    }
    if n == 0 || p == 0 {
        return Err(Error::InsufficientData("forest needs at least one row and one feature".into()));
    }
    if x.iter().chain(d).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite entries in forest inputs".into()));
    }
    let mtry = params.resolved_mtry(p);
    if mtry > p {
        return Err(Error::Argument(format!("mtry {mtry} exceeds {p} features")));
    }
    let trees = if d.iter().all(|&v| v == d[0]) {
        vec![Tree::leaf(d[0]); params.n_trees]
    } else {
        let grower = Grower {
            x: x.as_slice(),
            n,
            p,
            y: d,
            mtry,
            min_node: params.min_node,
            max_depth: params.max_depth.unwrap_or(usize::MAX),
        };
        (0..params.n_trees)
            .into_par_iter()
            .map(|b| {
                let mut rng = tree_rng(seed, b);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grower.grow(rows, &mut rng)
            })
            .collect()
    };
    Ok(ForestModel {
        trees,
        n_trees: params.n_trees,
        mtry,
        min_node: params.min_node,
        seed,
        n_features: p,
    })
}

pub fn predict_forest(model: &ForestModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.n_features {
        return Err(Error::Validation(format!(
            "forest fitted on {} columns, got {}",
            model.n_features,
            x.ncols()
        )));
    }
    let b = model.trees.len() as f64;
    Ok((0..x.nrows())
        .into_par_iter()
        .map(|r| model.trees.iter().map(|t| t.predict_row(x, r)).sum::<f64>() / b)
        .collect())
}
