//! One-hidden-layer perceptron: ReLU hidden units, logistic output,
//! weighted cross-entropy, mini-batch SGD with momentum.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gbdt::{sigmoid, softplus};
use crate::linalg::Matrix;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: 32, learning_rate: 0.01, momentum: 0.9, epochs: 50, batch_size: 64 }
    }
}

/// Network weights. Inputs are standardized with the stored training
/// statistics before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_inputs: usize,
    pub hidden: usize,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    /// Flat parameters: `w1` (hidden x inputs, row-major), `b1`, `w2`, `b2`.
    pub params: Vec<f64>,
    /// Weighted mean training loss after each epoch.
    pub loss_trace: Vec<f64>,
}

impl Mlp {
    pub fn n_params(n_inputs: usize, hidden: usize) -> usize {
        hidden * n_inputs + hidden + hidden + 1
    }

    /// Untrained network with uniform fan-in scaled weights and zero biases.
    pub fn init(n_inputs: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Model, 0);
        let mut params = vec![0.0; Self::n_params(n_inputs, hidden)];
        let l1 = (3.0 / n_inputs.max(1) as f64).sqrt();
        let l2 = (3.0 / hidden.max(1) as f64).sqrt();
        let (w1, rest) = params.split_at_mut(hidden * n_inputs);
        for w in w1.iter_mut() {
            *w = rng.random_range(-l1..l1);
        }
        for w in rest[hidden..2 * hidden].iter_mut() {
            *w = rng.random_range(-l2..l2);
        }
        Mlp {
            n_inputs,
            hidden,
            input_mean: vec![0.0; n_inputs],
            input_scale: vec![1.0; n_inputs],
            params,
            loss_trace: Vec::new(),
        }
    }

    fn standardize(&self, row: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = (row[k] - self.input_mean[k]) / self.input_scale[k];
        }
    }

    fn logit_standardized(&self, params: &[f64], z: &[f64], hidden_out: &mut [f64]) -> f64 {
        let (d, h) = (self.n_inputs, self.hidden);
        let w1 = &params[..h * d];
        let b1 = &params[h * d..h * d + h];
        let w2 = &params[h * d + h..h * d + 2 * h];
        let b2 = params[h * d + 2 * h];
        let mut out = b2;
        for j in 0..h {
            let pre = b1[j] + w1[j * d..(j + 1) * d].iter().zip(z).map(|(w, v)| w * v).sum::<f64>();
            let a = pre.max(0.0);
            hidden_out[j] = pre;
            out += w2[j] * a;
        }
        out
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let mut z = vec![0.0; self.n_inputs];
        let mut hid = vec![0.0; self.hidden];
        self.standardize(row, &mut z);
        sigmoid(self.logit_standardized(&self.params, &z, &mut hid))
    }

    /// Weighted mean cross-entropy and its gradient with respect to `params`,
    /// evaluated on already-standardized rows `rows` of `z`.
    pub fn loss_and_gradient(&self, params: &[f64], z: &Matrix, rows: &[usize], y: &[bool], w: &[f64]) -> (f64, Vec<f64>) {
        let (d, h) = (self.n_inputs, self.hidden);
        let mut grad = vec![0.0; params.len()];
        let mut pre = vec![0.0; h];
        let mass: f64 = rows.iter().map(|&i| w[i]).sum();
        let mut loss = 0.0;
        let w2 = &params[h * d + h..h * d + 2 * h];
        for &i in rows {
            let x = z.row(i);
            let logit = self.logit_standardized(params, x, &mut pre);
            let target = if y[i] { 1.0 } else { 0.0 };
            loss += w[i] * (softplus(logit) - target * logit);
            let dout = w[i] * (sigmoid(logit) - target) / mass;
            for j in 0..h {
                if pre[j] > 0.0 {
                    grad[h * d + h + j] += dout * pre[j];
                    let dpre = dout * w2[j];
                    grad[h * d + j] += dpre;
                    let gw = &mut grad[j * d..(j + 1) * d];
                    for (g, v) in gw.iter_mut().zip(x) {
                        *g += dpre * v;
                    }
                }
            }
            grad[h * d + 2 * h] += dout;
        }
        (loss / mass, grad)
    }

    /// Standardizes every row of `x` with the stored statistics.
    pub fn standardize_matrix(&self, x: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            let row = x.row(r).to_vec();
            self.standardize(&row, z.row_mut(r));
        }
        z
    }
}

pub fn fit_mlp(x: &Matrix, y: &[bool], weights: &[f64], params: &MlpParams, seed: u64) -> Mlp {
    let (n, d) = (x.rows(), x.cols());
    let mut net = Mlp::init(d, params.hidden, seed);
    for k in 0..d {
        let col = x.column(k);
        // indicator columns stay on their 0/1 scale
        if col.iter().all(|&v| v == 0.0 || v == 1.0) {
            continue;
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        net.input_mean[k] = mean;
        net.input_scale[k] = if var > 1e-24 { var.sqrt() } else { 1.0 };
    }
    let z = net.standardize_matrix(x);
    let mut rng = stream_rng(seed, Stream::Model, 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut velocity = vec![0.0; net.params.len()];
    let batch = params.batch_size.max(1);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let (_, grad) = net.loss_and_gradient(&net.params, &z, chunk, y, weights);
            for ((p, v), g) in net.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = params.momentum * *v - params.learning_rate * g;
                *p += *v;
            }
        }
        let (loss, _) = net.loss_and_gradient(&net.params, &z, &order, y, weights);
        net.loss_trace.push(loss);
    }
    net
}
