use rayon::prelude::*;

use super::{Players, Scorer, ShapError, ValueFunction};
use crate::linalg::Matrix;

pub const MAX_EXACT_PLAYERS: usize = 15;

/// Shapley values by enumerating all `2^d` coalitions.
pub fn exact_shapley(
    scorer: &dyn Scorer,
    instance: &[f64],
    background: &Matrix,
    players: &Players,
) -> Result<Vec<f64>, ShapError> {
    let d = players.len();
    if d > MAX_EXACT_PLAYERS {
        return Err(ShapError::TooManyFeatures { players: d, limit: MAX_EXACT_PLAYERS });
    }
    let vf = ValueFunction::new(scorer, instance, background, players)?;
    let masks: Vec<u64> = (0..1u64 << d).collect();
    let values: Vec<f64> = masks.par_chunks(64).flat_map_iter(|chunk| vf.values(chunk)).collect();

    // weight(s) = s! (d - s - 1)! / d!
    let mut weight = vec![0.0; d.max(1)];
    for (s, w) in weight.iter_mut().enumerate().take(d) {
        *w = (0..s).map(|k| (k + 1) as f64).product::<f64>() * (0..d - s - 1).map(|k| (k + 1) as f64).product::<f64>()
            / (1..=d).map(|k| k as f64).product::<f64>();
    }
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        for mask in 0..1u64 << d {
            if mask & bit == 0 {
                *p += weight[mask.count_ones() as usize] * (values[(mask | bit) as usize] - values[mask as usize]);
            }
        }
    }
    Ok(phi)
}
