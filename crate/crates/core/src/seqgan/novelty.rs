//! How much generated text says things the training data never did.

use std::collections::HashSet;

use crate::corpus::{Token, Utterance};
use crate::training::TrainError;

/// Percentage of n-gram types in `generated` that never occur in `train`.
/// N-grams are taken within sequences only; nothing spans a boundary.
/// Supported orders are 2 through 4.
pub fn ngram_novelty(
    generated: &[Vec<Token>],
    train: &[Utterance],
    n: usize,
) -> Result<f64, TrainError> {
    assert!((2..=4).contains(&n), "n-gram order must be 2, 3, or 4");
    let mut gen_types: HashSet<Vec<usize>> = HashSet::new();
    for seq in generated {
        for w in seq.windows(n) {
            gen_types.insert(w.iter().map(|t| t.index).collect());
        }
    }
    if gen_types.is_empty() {
        return Err(TrainError::NoNgrams(n));
    }
    let mut train_types: HashSet<Vec<usize>> = HashSet::new();
    for u in train {
        for w in u.tokens.windows(n) {
            train_types.insert(w.iter().map(|t| t.index).collect());
        }
    }
    let new = gen_types.iter().filter(|g| !train_types.contains(*g)).count();
    Ok(100.0 * new as f64 / gen_types.len() as f64)
}
