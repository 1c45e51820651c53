//! Synthetic code-switched corpus generator.
//!
//! Stands in for conversational corpora that cannot be redistributed. Two
//! hidden per-language bigram models produce locally coherent token
//! streams; a coin flip at each token boundary decides whether the language
//! switches. The output is raw text, one utterance per line, which then
//! flows through the normal tokenize/encode pipeline.

use std::collections::HashSet;

use crate::numerics::RngState;

use super::token::Lang;
use super::CorpusError;

/// Per-language bigram sampler over surface strings. Each context allows a
/// handful of successors so generated text has learnable structure.
struct BigramLm {
    surfaces: Vec<String>,
    // successors[c] applies after token c; the last entry is the
    // start-of-utterance context.
    successors: Vec<Vec<(usize, f64)>>,
}

const SUCCESSORS_PER_CONTEXT: usize = 4;

impl BigramLm {
    fn build(surfaces: Vec<String>, rng: &mut RngState) -> Self {
        let n = surfaces.len();
        let mut successors = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            // Draw order matters for determinism; sets iterate unpredictably.
            let mut chosen: Vec<usize> = Vec::with_capacity(SUCCESSORS_PER_CONTEXT);
            while chosen.len() < SUCCESSORS_PER_CONTEXT.min(n) {
                let c = rng.below(n);
                if !chosen.contains(&c) {
                    chosen.push(c);
                }
            }
            let mut weights: Vec<f64> = (0..chosen.len()).map(|_| rng.uniform() + 0.1).collect();
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            let mut succ: Vec<(usize, f64)> = chosen.into_iter().zip(weights).collect();
            succ.sort_by_key(|(t, _)| *t);
            successors.push(succ);
        }
        BigramLm {
            surfaces,
            successors,
        }
    }

    fn start_context(&self) -> usize {
        self.surfaces.len()
    }

    fn draw(&self, context: usize, rng: &mut RngState) -> usize {
        let succ = &self.successors[context];
        let u = rng.uniform();
        let mut acc = 0.0;
        for (tok, w) in succ {
            acc += w;
            if u < acc {
                return *tok;
            }
        }
        succ.last().expect("contexts have successors").0
    }
}

fn l0_surfaces(n: usize, rng: &mut RngState) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    while out.len() < n {
        let len = 2 + rng.below(5);
        let w: String = (0..len)
            .map(|_| (b'a' + rng.below(26) as u8) as char)
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn l1_surfaces(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            char::from_u32(0x4E00 + i as u32)
                .expect("offsets stay inside the Han block")
                .to_string()
        })
        .collect()
}

/// Generates `n_utterances` raw lines. Utterances start in L0 and flip
/// language with probability `switch_prob` at every subsequent token.
/// Lengths are 1 + Poisson(mean_len - 1). Deterministic given the seed.
pub fn synth_corpus(
    seed: u64,
    n_utterances: usize,
    switch_prob: f64,
    vocab_sizes: (usize, usize),
    mean_len: f64,
) -> Result<Vec<String>, CorpusError> {
    if vocab_sizes.0 < 10 || vocab_sizes.1 < 10 {
        return Err(CorpusError::BadParameter(format!(
            "synthetic vocabularies need at least 10 tokens per language, got {vocab_sizes:?}"
        )));
    }
    if !(0.0..=1.0).contains(&switch_prob) {
        return Err(CorpusError::BadParameter(format!(
            "switch probability {switch_prob} outside [0, 1]"
        )));
    }
    if mean_len < 1.0 {
        return Err(CorpusError::BadParameter(format!(
            "mean utterance length {mean_len} below 1"
        )));
    }

    let mut rng = RngState::seeded(seed);
    let lm0 = BigramLm::build(l0_surfaces(vocab_sizes.0, &mut rng), &mut rng);
    let lm1 = BigramLm::build(l1_surfaces(vocab_sizes.1), &mut rng);

    let mut lines = Vec::with_capacity(n_utterances);
    for _ in 0..n_utterances {
        let len = 1 + rng.poisson(mean_len - 1.0);
        let mut lang = Lang::L0;
        let mut ctx0 = lm0.start_context();
        let mut ctx1 = lm1.start_context();
        let mut words = Vec::with_capacity(len as usize);
        for t in 0..len {
            if t > 0 && rng.bernoulli(switch_prob) {
                lang = lang.other();
            }
            match lang {
                Lang::L0 => {
                    let tok = lm0.draw(ctx0, &mut rng);
                    ctx0 = tok;
                    words.push(lm0.surfaces[tok].clone());
                }
                Lang::L1 => {
                    let tok = lm1.draw(ctx1, &mut rng);
                    ctx1 = tok;
                    words.push(lm1.surfaces[tok].clone());
                }
            }
        }
        lines.push(words.join(" "));
    }
    Ok(lines)
}
