//! Corpus handling: tokenization, vocabularies, splits, side features, and
//! a synthetic corpus generator.

mod features;
mod split;
mod synth;
mod token;
mod vocab;

use std::path::Path;

use thiserror::Error;

pub use features::{
    derive_lang_features, load_features, write_features, FeatureDecl, FeatureFile, FeatureVector,
};
pub use split::{
    corpus_stats, split_corpus, split_indices, stats_of, CorpusSplit, CorpusStats, SplitStats,
};
pub use synth::synth_corpus;
pub use token::{is_han, tokenize_utterance, Lang, SurfaceToken};
pub use vocab::{
    build_vocabulary, Layout, Token, Utterance, Vocabulary, BOS, BOS_TEXT, DUMMY0_TEXT,
    DUMMY1_TEXT, EOS, EOS_TEXT, UNK0_TEXT, UNK1_TEXT,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("utterance is empty after tokenization")]
    EmptyUtterance,
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("corpus has {n} utterances; need at least {need}")]
    TooSmall { n: usize, need: usize },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("misaligned features: {0}")]
    Alignment(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Reads a corpus file (UTF-8, one utterance per line) and tokenizes every
/// line. Blank lines are skipped rather than treated as empty utterances.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<SurfaceToken>>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(tokenize_utterance(line)?);
    }
    if out.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(out)
}
