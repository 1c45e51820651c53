//! Synthetic corpus generation.

use std::path::Path;

use cslm_core::corpus::synth_corpus;

use crate::Failure;

pub fn cmd_synth(
    out: &Path,
    seed: u64,
    n: usize,
    switch_prob: f64,
    mean_len: f64,
    vocab_size: usize,
) -> Result<(), Failure> {
    let lines = synth_corpus(seed, n, switch_prob, (vocab_size, vocab_size), mean_len)?;
    let mut text = String::new();
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    std::fs::write(out, text)?;
    Ok(())
}
