//! Gradient-boosted regression trees on the logistic loss.
//!
//! Each round fits a depth-limited tree to the weighted gradients and
//! hessians of the current margins. Leaves hold the regularized Newton step
//! `-G / (H + lambda)`; predictions add `shrinkage * leaf` per tree.
//! Splits are exact greedy over columns presorted once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian mass per child.
    pub min_child_weight: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams { rounds: 200, max_depth: 3, shrinkage: 0.1, lambda: 1.0, min_child_weight: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegressionNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                RegressionNode::Leaf { value } => return value,
                RegressionNode::Split { feature, threshold, left, right } => {
                    k = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub base_margin: f64,
    pub shrinkage: f64,
    pub trees: Vec<RegressionTree>,
    /// Weighted mean logistic loss on the training rows: initial value, then after each round.
    pub loss_trace: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn weighted_log_loss(margins: &[f64], y: &[bool], w: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut mass = 0.0;
    for ((&m, &yi), &wi) in margins.iter().zip(y).zip(w) {
        total += wi * (softplus(m) - if yi { m } else { 0.0 });
        mass += wi;
    }
    total / mass
}

impl GradientBoosting {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_margin + self.shrinkage * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

pub fn fit_gbdt(x: &Matrix, y: &[bool], weights: &[f64], params: &GbdtParams) -> GradientBoosting {
    let n = x.rows();
    let d = x.cols();
    let columns: Vec<Vec<f64>> = (0..d).map(|f| x.column(f)).collect();
    let sorted: Vec<Vec<u32>> = columns
        .par_iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut model = GradientBoosting { base_margin: 0.0, shrinkage: params.shrinkage, trees: Vec::new(), loss_trace: Vec::new() };
    let mut margins = vec![model.base_margin; n];
    model.loss_trace.push(weighted_log_loss(&margins, y, weights));
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = weights[i] * (p - if y[i] { 1.0 } else { 0.0 });
            hess[i] = weights[i] * (p * (1.0 - p)).max(1e-16);
        }
        let tree = build_tree(&columns, &sorted, &grad, &hess, params);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += params.shrinkage * tree_value_for_row(&tree, &columns, i);
        }
        model.trees.push(tree);
        model.loss_trace.push(weighted_log_loss(&margins, y, weights));
    }
    model
}

fn tree_value_for_row(tree: &RegressionTree, columns: &[Vec<f64>], i: usize) -> f64 {
    let mut k = 0;
    loop {
        match tree.nodes[k] {
            RegressionNode::Leaf { value } => return value,
            RegressionNode::Split { feature, threshold, left, right } => {
                k = if columns[feature][i] <= threshold { left } else { right };
            }
        }
    }
}

fn build_tree(
    columns: &[Vec<f64>],
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
) -> RegressionTree {
    let n = grad.len();
    let lambda = params.lambda;
    let mut nodes = vec![RegressionNode::Leaf { value: 0.0 }];
    // per-node gradient and hessian sums, indexed by node id
    let mut sums = vec![(grad.iter().sum::<f64>(), hess.iter().sum::<f64>())];
    let mut node_of = vec![0usize; n];
    let mut frontier = vec![0usize];

    for _ in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        // slot of each node id in the frontier, or usize::MAX
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot[id] = s;
        }
        let per_feature: Vec<Vec<Option<Candidate>>> = (0..columns.len())
            .into_par_iter()
            .map(|f| {
                let col = &columns[f];
                let k = frontier.len();
                let mut left = vec![(0.0f64, 0.0f64); k];
                let mut last: Vec<Option<f64>> = vec![None; k];
                let mut best: Vec<Option<Candidate>> = vec![None; k];
                for &i in &sorted[f] {
                    let i = i as usize;
                    let s = slot[node_of[i]];
                    if s == usize::MAX {
                        continue;
                    }
                    let v = col[i];
                    if let Some(prev) = last[s] {
                        if v != prev {
                            let (gl, hl) = left[s];
                            let (g, h) = sums[frontier[s]];
                            let (gr, hr) = (g - gl, h - hl);
                            if hl >= params.min_child_weight && hr >= params.min_child_weight {
                                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda);
                                if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                                    let mid = prev + (v - prev) / 2.0;
                                    let threshold = if mid < v { mid } else { prev };
                                    best[s] = Some(Candidate { gain, feature: f, threshold });
                                }
                            }
                        }
                    }
                    left[s].0 += grad[i];
                    left[s].1 += hess[i];
                    last[s] = Some(v);
                }
                best
            })
            .collect();

        let mut next = Vec::new();
        let mut split_of: Vec<Option<(usize, f64, usize, usize)>> = vec![None; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            let mut best: Option<Candidate> = None;
            for cands in &per_feature {
                if let Some(c) = cands[s] {
                    if best.is_none_or(|b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
            if let Some(c) = best {
                let l = nodes.len();
                nodes.push(RegressionNode::Leaf { value: 0.0 });
                nodes.push(RegressionNode::Leaf { value: 0.0 });
                sums.push((0.0, 0.0));
                sums.push((0.0, 0.0));
                nodes[id] = RegressionNode::Split { feature: c.feature, threshold: c.threshold, left: l, right: l + 1 };
                split_of.resize(nodes.len(), None);
                split_of[id] = Some((c.feature, c.threshold, l, l + 1));
                next.push(l);
                next.push(l + 1);
            }
        }
        for i in 0..n {
            if let Some((f, t, l, r)) = split_of[node_of[i]] {
                let child = if columns[f][i] <= t { l } else { r };
                node_of[i] = child;
                sums[child].0 += grad[i];
                sums[child].1 += hess[i];
            }
        }
        frontier = next;
    }

    for (id, node) in nodes.iter_mut().enumerate() {
        if let RegressionNode::Leaf { value } = node {
            let (g, h) = sums[id];
            *value = -g / (h + lambda);
        }
    }
    RegressionTree { nodes }
}
