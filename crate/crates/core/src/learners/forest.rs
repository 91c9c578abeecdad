//! Bagged CART classification trees with Gini splits.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 200, max_depth: None, min_samples_leaf: 1, max_features: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Weighted fraction of positives reaching the leaf.
    Leaf { positive_fraction: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    pub nodes: Vec<TreeNode>,
}

impl ClassificationTree {
    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                TreeNode::Leaf { positive_fraction } => return positive_fraction,
                TreeNode::Split { feature, threshold, left, right } => {
                    k = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// 1 for a positive majority, 0 for negative, one half on an exact tie.
    pub fn vote(&self, row: &[f64]) -> f64 {
        let v = self.leaf_value(row);
        if v > 0.5 {
            1.0
        } else if v < 0.5 {
            0.0
        } else {
            0.5
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<ClassificationTree>,
}

impl RandomForest {
    /// Fraction of trees voting positive.
    pub fn score(&self, row: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().map(|t| t.vote(row)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_forest(x: &Matrix, y: &[bool], weights: &[f64], params: &ForestParams, seed: u64) -> RandomForest {
    let d = x.cols();
    let mtry = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
        .clamp(1, d.max(1));
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, Stream::Tree, t as u64);
            let n = x.rows();
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder { x, y, weights, params, mtry, rng, nodes: Vec::new() };
            builder.grow(sample, 0);
            ClassificationTree { nodes: builder.nodes }
        })
        .collect();
    RandomForest { trees }
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    weights: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    rng: crate::rng::Rng,
    nodes: Vec<TreeNode>,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

impl TreeBuilder<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let (mut pos, mut total) = (0.0, 0.0);
        for &i in &samples {
            total += self.weights[i];
            if self.y[i] {
                pos += self.weights[i];
            }
        }
        let fraction = if total > 0.0 { pos / total } else { 0.5 };
        self.nodes.push(TreeNode::Leaf { positive_fraction: fraction });

        let pure = pos <= 0.0 || pos >= total;
        let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || samples.len() < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&samples, pos, total) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = TreeNode::Split { feature, threshold, left: l, right: r };
        id
    }

    /// Best Gini split among `mtry` random features; keeps drawing further
    /// features while none of those tried admits a valid split.
    fn best_split(&mut self, samples: &[usize], pos: f64, total: f64) -> Option<(usize, f64)> {
        let d = self.x.cols();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(&mut self.rng);
        let parent = gini(pos, total);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            sorted.clear();
            sorted.extend(samples.iter().map(|&i| (self.x.get(i, f), i)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (mut lpos, mut ltot) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let i = sorted[k].1;
                ltot += self.weights[i];
                if self.y[i] {
                    lpos += self.weights[i];
                }
                let (v, next) = (sorted[k].0, sorted[k + 1].0);
                if v == next || k + 1 < min_leaf || sorted.len() - k - 1 < min_leaf {
                    continue;
                }
                let rtot = total - ltot;
                let child = (ltot * gini(lpos, ltot) + rtot * gini(pos - lpos, rtot)) / total;
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
