//! Shared fixtures for the benchmarks.

use fairaudit::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scores with a mild class shift and plenty of ties.
pub fn scored_labels(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.06)).collect();
    let scores = labels.iter().map(|&y| ((rng.random::<f64>() + if y { 0.3 } else { 0.0 }) * 1000.0).round() / 1000.0).collect();
    (scores, labels)
}

/// A linearly separable-ish design matrix with noisy labels.
pub fn design(n: usize, d: usize, seed: u64) -> (Matrix, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect());
    let y = (0..n)
        .map(|r| {
            let s: f64 = x.row(r).iter().enumerate().map(|(j, v)| v / (j + 1) as f64).sum();
            s + rng.random_range(-0.5..0.5) > 0.0
        })
        .collect();
    (x, y)
}
