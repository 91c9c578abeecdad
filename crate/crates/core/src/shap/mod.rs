//! Model-agnostic Shapley attributions.
//!
//! Missing players take their values from background rows (interventional
//! replacement): the value of a coalition `S` is the mean model score over
//! the background with the columns of every player in `S` overwritten by
//! the explained instance. A player is a set of columns, so one-hot groups
//! can be attributed as a single feature.

mod exact;
mod kernel;
mod summary;

use std::ops::Range;

use rand::seq::index::sample;
use thiserror::Error;

pub use exact::{exact_shapley, MAX_EXACT_PLAYERS};
pub use kernel::{kernel_shap, MAX_KERNEL_PLAYERS};
pub use summary::{explain_model, shap_matrix, shap_summary, FeatureImportance, ShapConfig, ShapMatrix, ShapMethod, ShapSummary};

use crate::learners::TrainedModel;
use crate::linalg::Matrix;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Error)]
pub enum ShapError {
    #[error("{players} players exceed the limit of {limit} for this method")]
    TooManyFeatures { players: usize, limit: usize },
    #[error("coalition regression is singular; add coalition samples")]
    SingularRegression,
    #[error("background set is empty")]
    EmptyBackground,
    #[error("nothing to explain")]
    EmptySample,
    #[error("{0}")]
    InvalidArgument(String),
}

/// Anything that maps rows to scores. Must be callable from several threads.
pub trait Scorer: Sync {
    fn n_features(&self) -> usize;
    fn score_rows(&self, x: &Matrix) -> Vec<f64>;
}

impl Scorer for TrainedModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score_rows(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| self.score_row(x.row(r))).collect()
    }
}

/// Wraps a row function as a [`Scorer`].
pub struct FnScorer<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnScorer<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        FnScorer { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Scorer for FnScorer<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score_rows(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| (self.f)(x.row(r))).collect()
    }
}

/// Partition of the input columns into Shapley players.
#[derive(Debug, Clone, PartialEq)]
pub struct Players {
    columns: Vec<Vec<usize>>,
}

impl Players {
    /// One player per column.
    pub fn singletons(n_columns: usize) -> Self {
        Players { columns: (0..n_columns).map(|c| vec![c]).collect() }
    }

    pub fn from_ranges(groups: &[Range<usize>]) -> Self {
        Players { columns: groups.iter().map(|r| r.clone().collect()).collect() }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self, player: usize) -> &[usize] {
        &self.columns[player]
    }

    fn n_columns(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }
}

/// Coalition value function over a fixed instance and background.
pub(crate) struct ValueFunction<'a> {
    scorer: &'a dyn Scorer,
    instance: &'a [f64],
    background: &'a Matrix,
    players: &'a Players,
}

impl<'a> ValueFunction<'a> {
    pub(crate) fn new(
        scorer: &'a dyn Scorer,
        instance: &'a [f64],
        background: &'a Matrix,
        players: &'a Players,
    ) -> Result<Self, ShapError> {
        if background.rows() == 0 {
            return Err(ShapError::EmptyBackground);
        }
        let d = scorer.n_features();
        if instance.len() != d || background.cols() != d || players.n_columns() > d {
            return Err(ShapError::InvalidArgument(format!(
                "instance has {} columns, background {}, model expects {}",
                instance.len(),
                background.cols(),
                d
            )));
        }
        Ok(ValueFunction { scorer, instance, background, players })
    }

    /// Values of several coalitions (bitmasks over players) in one model call.
    pub(crate) fn values(&self, masks: &[u64]) -> Vec<f64> {
        let m = self.background.rows();
        let d = self.background.cols();
        let mut batch = Matrix::zeros(masks.len() * m, d);
        for (k, &mask) in masks.iter().enumerate() {
            for r in 0..m {
                let row = batch.row_mut(k * m + r);
                row.copy_from_slice(self.background.row(r));
                for p in 0..self.players.len() {
                    if mask >> p & 1 == 1 {
                        for &c in self.players.columns(p) {
                            row[c] = self.instance[c];
                        }
                    }
                }
            }
        }
        let scores = self.scorer.score_rows(&batch);
        scores.chunks(m).map(|c| c.iter().sum::<f64>() / m as f64).collect()
    }
}

/// Draws up to `n` background rows without replacement.
pub fn sample_background(x: &Matrix, n: usize, seed: u64) -> Matrix {
    if x.rows() <= n {
        return x.clone();
    }
    let mut rng = stream_rng(seed, Stream::Background, 0);
    let mut idx = sample(&mut rng, x.rows(), n).into_vec();
    idx.sort_unstable();
    x.select_rows(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(beta: Vec<f64>) -> FnScorer<impl Fn(&[f64]) -> f64 + Sync> {
        let d = beta.len();
        FnScorer::new(d, move |r: &[f64]| r.iter().zip(&beta).map(|(a, b)| a * b).sum())
    }

    fn background() -> Matrix {
        Matrix::from_rows(&[[0.0, 1.0, 2.0], [1.0, 0.0, -1.0], [2.0, 2.0, 0.5]])
    }

    #[test]
    fn linear_model_attribution_is_beta_times_offset() {
        let beta = vec![1.5, -2.0, 0.25];
        let f = linear(beta.clone());
        let bg = background();
        let x = [3.0, -1.0, 4.0];
        let players = Players::singletons(3);
        let exact = exact_shapley(&f, &x, &bg, &players).unwrap();
        let kernel = kernel_shap(&f, &x, &bg, &players, 6, 0).unwrap();
        for i in 0..3 {
            let mean: f64 = bg.column(i).iter().sum::<f64>() / 3.0;
            let want = beta[i] * (x[i] - mean);
            assert!((exact[i] - want).abs() < 1e-12);
            assert!((kernel[i] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn grouped_players_sum_their_columns() {
        let f = linear(vec![1.0, 2.0, 3.0]);
        let bg = background();
        let x = [1.0, 1.0, 1.0];
        let single = exact_shapley(&f, &x, &bg, &Players::singletons(3)).unwrap();
        let grouped = exact_shapley(&f, &x, &bg, &Players::from_ranges(&[0..1, 1..3])).unwrap();
        assert!((grouped[0] - single[0]).abs() < 1e-12);
        assert!((grouped[1] - single[1] - single[2]).abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        let f = linear(vec![1.0; 16]);
        let bg = Matrix::zeros(1, 16);
        let x = [0.0; 16];
        assert!(matches!(
            exact_shapley(&f, &x, &bg, &Players::singletons(16)),
            Err(ShapError::TooManyFeatures { players: 16, limit: 15 })
        ));
        assert!(matches!(kernel_shap(&f, &x, &bg, &Players::singletons(16), 31, 0), Err(ShapError::InvalidArgument(_))));
        assert!(matches!(
            kernel_shap(&f, &x, &Matrix::zeros(0, 16), &Players::singletons(16), 100, 0),
            Err(ShapError::EmptyBackground)
        ));
    }

    #[test]
    fn single_player_gets_the_whole_gap() {
        let f = linear(vec![2.0]);
        let bg = Matrix::from_rows(&[[1.0], [3.0]]);
        let phi = kernel_shap(&f, &[5.0], &bg, &Players::singletons(1), 2, 0).unwrap();
        assert_eq!(phi, vec![6.0]);
    }

    #[test]
    fn summary_ranks_by_mean_abs_then_name() {
        let m = ShapMatrix {
            feature_names: vec!["b".into(), "a".into(), "c".into()],
            base_value: 0.0,
            attributions: Matrix::from_rows(&[[1.0, -1.0, 0.1], [-1.0, 1.0, 0.0]]),
            feature_values: Matrix::zeros(2, 3),
            predictions: vec![0.0, 0.0],
        };
        let s = shap_summary(&m);
        assert_eq!(s.top(3), vec!["a", "b", "c"]);
        assert_eq!(s.features[2].rank, 3);
        assert!(s.to_csv().starts_with("rank,feature,mean_abs_shap\n1,a,1\n"));
    }
}
