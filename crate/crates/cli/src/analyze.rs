//! Corpus analysis: counts, switch rate, n-gram diversity, and optional
//! novelty against a reference corpus.

use std::collections::HashSet;
use std::path::Path;

use cslm_core::corpus::{build_vocabulary, read_corpus, Lang, SurfaceToken, Utterance};

use crate::report::fmt_opt;
use crate::sample::novelty_rows;
use crate::Failure;

pub const ANALYZE_HEADER: &str = "metric\tvalue";

fn ngram_types(utts: &[Vec<SurfaceToken>], n: usize) -> usize {
    let mut types: HashSet<Vec<&str>> = HashSet::new();
    for utt in utts {
        for w in utt.windows(n) {
            types.insert(w.iter().map(|t| t.text.as_str()).collect());
        }
    }
    types.len()
}

fn stats_rows(utts: &[Vec<SurfaceToken>]) -> Vec<String> {
    let tokens: usize = utts.iter().map(|u| u.len()).sum();
    let l0: usize = utts
        .iter()
        .flat_map(|u| u.iter())
        .filter(|t| t.lang == Lang::L0)
        .count();
    let mut switches = 0usize;
    let mut boundaries = 0usize;
    for u in utts {
        for pair in u.windows(2) {
            boundaries += 1;
            if pair[0].lang != pair[1].lang {
                switches += 1;
            }
        }
    }
    let switch_rate = (boundaries > 0).then(|| switches as f64 / boundaries as f64);
    let mut rows = vec![
        format!("utterances\t{}", utts.len()),
        format!("tokens\t{tokens}"),
        format!("l0_tokens\t{l0}"),
        format!("l1_tokens\t{}", tokens - l0),
        format!("switch_rate\t{}", fmt_opt(switch_rate)),
    ];
    for (n, label) in [
        (1, "unigram_types"),
        (2, "bigram_types"),
        (3, "trigram_types"),
        (4, "quadgram_types"),
    ] {
        rows.push(format!("{label}\t{}", ngram_types(utts, n)));
    }
    rows
}

pub fn cmd_analyze(
    corpus: &Path,
    against: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let utts = read_corpus(corpus)?;
    let mut rows = stats_rows(&utts);

    if let Some(against) = against {
        let reference = read_corpus(against)?;
        // One vocabulary over both corpora puts their n-grams in the same
        // index space; every form is frequent enough to stay out of UNK.
        let mut all = utts.clone();
        all.extend(reference.iter().cloned());
        let vocab = build_vocabulary(&all, 1)?;
        let generated: Vec<Vec<_>> = utts.iter().map(|u| vocab.encode(u).tokens).collect();
        let train: Vec<Utterance> = reference.iter().map(|u| vocab.encode(u)).collect();
        for row in novelty_rows(&generated, &train)? {
            let (n, pct) = row.split_once('\t').expect("two novelty columns");
            rows.push(format!("novelty_{n}\t{pct}"));
        }
    }

    let mut text = String::from(ANALYZE_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(r);
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
