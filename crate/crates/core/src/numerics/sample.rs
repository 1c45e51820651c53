//! Drawing from discrete distributions.

use thiserror::Error;

use super::rng::RngState;
use super::tensor::softmax;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("distribution sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("negative probability {p} at index {index}")]
    Negative { p: f64, index: usize },
    #[error("empty distribution")]
    Empty,
}

/// Inverse-CDF draw from `probs`. The distribution must be normalized to
/// within 1e-9; anything else is a caller bug surfaced as an error rather
/// than a silently skewed draw.
pub fn sample_categorical(probs: &[f64], rng: &mut RngState) -> Result<usize, SampleError> {
    if probs.is_empty() {
        return Err(SampleError::Empty);
    }
    let mut sum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        if *p < 0.0 {
            return Err(SampleError::Negative { p: *p, index: i });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SampleError::NotNormalized { sum });
    }
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // Rounding can leave acc a hair under 1; the draw belongs to the tail.
    Ok(last_nonzero)
}

/// Softmax over `logits`, then a categorical draw.
pub fn sample_from_logits(logits: &[f64], rng: &mut RngState) -> usize {
    let probs = softmax(logits);
    sample_categorical(&probs, rng).expect("softmax output is normalized")
}

/// Zeroes the probabilities at `banned` indices and renormalizes the rest.
/// Errors if nothing remains to draw from.
pub fn mask_renormalize(probs: &[f64], banned: &[usize]) -> Result<Vec<f64>, SampleError> {
    let mut out = probs.to_vec();
    for b in banned {
        out[*b] = 0.0;
    }
    let sum: f64 = out.iter().sum();
    if sum <= 0.0 {
        return Err(SampleError::Empty);
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
    Ok(out)
}
