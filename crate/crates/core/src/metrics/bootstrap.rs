use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MetricsError, RankedScores};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub iterations: usize,
    pub retained: usize,
    pub skipped_degenerate: usize,
    pub mean_auc: f64,
    /// Sample standard deviation of the retained AUCs (0 with one retained).
    pub std_auc: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aucs: Option<Vec<f64>>,
}

/// Bootstrap distribution of the AUC: each iteration resamples `n` indices
/// with replacement from a generator seeded by `(seed, iteration)`.
/// Resamples holding a single class are skipped and counted.
pub fn bootstrap_auc(
    scores: &[f64],
    labels: &[bool],
    iterations: usize,
    seed: u64,
    keep_samples: bool,
) -> Result<BootstrapSummary, MetricsError> {
    if iterations == 0 {
        return Err(MetricsError::InvalidArgument("bootstrap needs at least one iteration".into()));
    }
    let ranked = RankedScores::new(scores, labels)?;
    ranked.auc()?;
    let n = ranked.len();
    let draws: Vec<Option<f64>> = (0..iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = stream_rng(seed, Stream::Bootstrap, it as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            ranked.counts_weighted(|i| counts[i] as u64).auc()
        })
        .collect();
    let aucs: Vec<f64> = draws.iter().flatten().copied().collect();
    if aucs.is_empty() {
        return Err(MetricsError::AllDegenerate);
    }
    let retained = aucs.len();
    let mean_auc = aucs.iter().sum::<f64>() / retained as f64;
    let std_auc = if retained > 1 {
        (aucs.iter().map(|a| (a - mean_auc).powi(2)).sum::<f64>() / (retained - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(BootstrapSummary {
        iterations,
        retained,
        skipped_degenerate: iterations - retained,
        mean_auc,
        std_auc,
        seed,
        aucs: keep_samples.then_some(aucs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_scores() {
        let labels: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
        let s = bootstrap_auc(&[0.4; 40], &labels, 200, 9, true).unwrap();
        assert_eq!(s.mean_auc, 0.5);
        assert_eq!(s.std_auc, 0.0);
        assert!(s.aucs.unwrap().iter().all(|&a| a == 0.5));
        assert_eq!(s.retained + s.skipped_degenerate, 200);
    }

    #[test]
    fn deterministic_under_seed() {
        let scores: Vec<f64> = (0..50).map(|i| ((i * 37) % 17) as f64).collect();
        let labels: Vec<bool> = (0..50).map(|i| i % 4 == 0).collect();
        let a = bootstrap_auc(&scores, &labels, 300, 1, true).unwrap();
        let b = bootstrap_auc(&scores, &labels, 300, 1, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, bootstrap_auc(&scores, &labels, 300, 2, true).unwrap());
    }

    #[test]
    fn degenerate_resamples_are_skipped() {
        // one positive among three: about 30% of resamples miss it
        let s = bootstrap_auc(&[0.9, 0.1, 0.2], &[true, false, false], 500, 3, false).unwrap();
        assert!(s.skipped_degenerate > 50);
        assert_eq!(s.mean_auc, 1.0);
    }

    #[test]
    fn rejects_zero_iterations_and_single_class() {
        assert!(bootstrap_auc(&[0.1, 0.2], &[true, false], 0, 1, false).is_err());
        assert!(matches!(
            bootstrap_auc(&[0.1, 0.2], &[true, true], 10, 1, false),
            Err(MetricsError::SingleClass)
        ));
    }
}
