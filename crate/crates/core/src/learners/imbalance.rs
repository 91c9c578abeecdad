use rand::seq::index::sample;

use super::LearnerError;
use crate::rng::{stream_rng, Stream};

/// Keeps every positive and exactly `round(keep_frac * n_neg)` negatives
/// drawn without replacement. Returns sorted indices. With no positives
/// the input is returned whole and a warning is logged.
pub fn downsample_negatives(labels: &[bool], keep_frac: f64, seed: u64) -> Result<Vec<usize>, LearnerError> {
    if !(keep_frac > 0.0 && keep_frac <= 1.0) {
        return Err(LearnerError::InvalidParameter(format!("keep_frac {keep_frac} outside (0, 1]")));
    }
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if negatives.len() == labels.len() {
        log::warn!("downsampling: no positive samples, keeping all {} rows", labels.len());
        return Ok((0..labels.len()).collect());
    }
    let keep = (keep_frac * negatives.len() as f64).round() as usize;
    let mut rng = stream_rng(seed, Stream::Downsample, 0);
    let mut out: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    out.extend(sample(&mut rng, negatives.len(), keep).into_iter().map(|k| negatives[k]));
    out.sort_unstable();
    Ok(out)
}

/// Prevalence weights: negatives weigh 1, positives `(1 - q) / q`, so both
/// classes carry equal total mass.
pub fn class_weights(labels: &[bool]) -> Result<Vec<f64>, LearnerError> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(LearnerError::SingleClass);
    }
    let w_pos = n_neg as f64 / n_pos as f64;
    Ok(labels.iter().map(|&y| if y { w_pos } else { 1.0 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_all_positives_and_exact_negative_count() {
        let labels: Vec<bool> = (0..102).map(|i| i < 2).collect();
        let kept = downsample_negatives(&labels, 0.1, 5).unwrap();
        assert_eq!(kept.len(), 12);
        assert!(kept.contains(&0) && kept.contains(&1));
        let pos = kept.iter().filter(|&&i| labels[i]).count();
        assert_eq!(pos as f64 / kept.len() as f64, 1.0 / 6.0);
    }

    #[test]
    fn keep_all_is_identity() {
        let labels: Vec<bool> = (0..30).map(|i| i % 4 == 0).collect();
        assert_eq!(downsample_negatives(&labels, 1.0, 1).unwrap(), (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn no_positives_returns_everything() {
        assert_eq!(downsample_negatives(&[false; 5], 0.1, 1).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_bad_fraction() {
        assert!(downsample_negatives(&[true, false], 0.0, 1).is_err());
        assert!(downsample_negatives(&[true, false], 1.5, 1).is_err());
    }

    #[test]
    fn weights_balance_classes() {
        assert_eq!(class_weights(&[true, false, true, false]).unwrap(), vec![1.0; 4]);
        assert_eq!(class_weights(&[true, false, false, false]).unwrap(), vec![3.0, 1.0, 1.0, 1.0]);
        assert!(matches!(class_weights(&[false, false]), Err(LearnerError::SingleClass)));
    }
}
