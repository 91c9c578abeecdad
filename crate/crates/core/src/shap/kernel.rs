use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng as _;

use super::{Players, Scorer, ShapError, ValueFunction};
use crate::linalg::{cholesky_solve, Matrix};
use crate::rng::{stream_rng, Stream};

/// Coalitions are bitmasks over players.
pub const MAX_KERNEL_PLAYERS: usize = 64;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Shapley kernel weight of a coalition of size `s` among `d` players.
fn kernel_weight(d: usize, s: usize) -> f64 {
    (d - 1) as f64 / (binomial(d, s) * s as f64 * (d - s) as f64)
}

/// Kernel SHAP: weighted least squares over coalitions with the empty and
/// full coalitions enforced as constraints, so the attributions always sum
/// to `f(x) - E[f]`.
///
/// When the budget covers all `2^d - 2` proper coalitions they are
/// enumerated with exact kernel weights, which reproduces the exact
/// Shapley values. Otherwise coalitions are drawn in complementary pairs
/// with sizes sampled proportionally to their total kernel weight.
pub fn kernel_shap(
    scorer: &dyn Scorer,
    instance: &[f64],
    background: &Matrix,
    players: &Players,
    n_coalition_samples: usize,
    seed: u64,
) -> Result<Vec<f64>, ShapError> {
    let d = players.len();
    if d > MAX_KERNEL_PLAYERS {
        return Err(ShapError::TooManyFeatures { players: d, limit: MAX_KERNEL_PLAYERS });
    }
    if n_coalition_samples < 2 * d {
        return Err(ShapError::InvalidArgument(format!(
            "{n_coalition_samples} coalition samples; need at least {}",
            2 * d
        )));
    }
    let vf = ValueFunction::new(scorer, instance, background, players)?;
    let full_mask = if d == 64 { u64::MAX } else { (1u64 << d) - 1 };
    let ends = vf.values(&[0, full_mask]);
    let (base, fx) = (ends[0], ends[1]);
    let delta = fx - base;
    if d <= 1 {
        return Ok(vec![delta; d]);
    }

    let proper = if d < 63 { (1u64 << d) - 2 } else { u64::MAX };
    let mut coalitions: BTreeMap<u64, f64> = BTreeMap::new();
    if (n_coalition_samples as u64) >= proper {
        for mask in 1..full_mask {
            coalitions.insert(mask, kernel_weight(d, mask.count_ones() as usize));
        }
    } else {
        let mut rng = stream_rng(seed, Stream::Coalitions, 0);
        let size_weights: Vec<f64> = (1..d).map(|s| (d - 1) as f64 / (s * (d - s)) as f64).collect();
        let total: f64 = size_weights.iter().sum();
        let mut drawn = 0;
        while drawn < n_coalition_samples {
            let mut u = rng.random::<f64>() * total;
            let mut s = 1;
            for (k, w) in size_weights.iter().enumerate() {
                s = k + 1;
                if u < *w {
                    break;
                }
                u -= w;
            }
            let mut mask = 0u64;
            for p in sample(&mut rng, d, s) {
                mask |= 1 << p;
            }
            *coalitions.entry(mask).or_insert(0.0) += 1.0;
            *coalitions.entry(full_mask & !mask).or_insert(0.0) += 1.0;
            drawn += 2;
        }
    }

    let masks: Vec<u64> = coalitions.keys().copied().collect();
    let values = vf.values(&masks);

    // eliminate the last player through the sum constraint
    let k = d - 1;
    let last = 1u64 << k;
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    let mut z = vec![0.0; k];
    for ((&mask, &w), &v) in coalitions.iter().zip(&values) {
        let z_last = if mask & last != 0 { 1.0 } else { 0.0 };
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = (mask >> i & 1) as f64 - z_last;
        }
        let target = v - base - z_last * delta;
        for i in 0..k {
            if z[i] == 0.0 {
                continue;
            }
            for j in 0..k {
                a[i * k + j] += w * z[i] * z[j];
            }
            b[i] += w * z[i] * target;
        }
    }
    let head = cholesky_solve(&a, &b, k).map_err(|_| ShapError::SingularRegression)?;
    let mut phi = head;
    let rest: f64 = phi.iter().sum();
    phi.push(delta - rest);
    Ok(phi)
}
