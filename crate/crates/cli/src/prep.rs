//! Corpus preparation: split, build the vocabulary, write statistics.

use std::path::Path;

use cslm_core::corpus::{
    build_vocabulary, load_features, split_indices, stats_of, write_features, Lang, Utterance,
    Vocabulary,
};

use crate::exp::{read_corpus_lines, ExperimentDir, SPLIT_NAMES};
use crate::report::write_tsv;
use crate::Failure;

pub const STATS_HEADER: &str = "split\tutterances\ttokens\tl0_tokens\tl1_tokens\toov_tokens";

fn oov_count(vocab: &Vocabulary, utts: &[Utterance]) -> usize {
    utts.iter()
        .flat_map(|u| &u.tokens)
        .filter(|t| t.index == vocab.unk(Lang::L0) || t.index == vocab.unk(Lang::L1))
        .count()
}

pub fn cmd_prep(
    corpus: &Path,
    exp_root: &Path,
    min_count: usize,
    seed: u64,
    features: Option<&Path>,
) -> Result<(), Failure> {
    if min_count == 0 {
        return Err(Failure::Config("--min-count must be at least 1".into()));
    }
    let lines = read_corpus_lines(corpus)?;
    let (order, n_train, n_dev) = split_indices(lines.len(), seed)?;

    // Partition raw lines and token lists with one permutation so split
    // files preserve the original text byte for byte.
    let mut parts: [Vec<&(String, Vec<_>)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (pos, &i) in order.iter().enumerate() {
        let slot = if pos < n_train {
            0
        } else if pos < n_train + n_dev {
            1
        } else {
            2
        };
        parts[slot].push(&lines[i]);
    }

    // The vocabulary sees only training text; dev and test words it never
    // saw become UNKs, as they would against a genuinely unseen corpus.
    let train_tokens: Vec<Vec<_>> = parts[0].iter().map(|(_, t)| t.clone()).collect();
    let vocab = build_vocabulary(&train_tokens, min_count)?;

    let exp = ExperimentDir::new(exp_root);
    exp.create()?;
    vocab.save_tsv(&exp.vocab_path())?;

    let mut stats_rows = Vec::with_capacity(3);
    for (slot, name) in SPLIT_NAMES.iter().enumerate() {
        let mut text = String::new();
        for (raw, _) in &parts[slot] {
            text.push_str(raw);
            text.push('\n');
        }
        std::fs::write(exp.split_path(name), text)?;

        let encoded: Vec<Utterance> = parts[slot].iter().map(|(_, t)| vocab.encode(t)).collect();
        let s = stats_of(&encoded);
        stats_rows.push(format!(
            "{name}\t{}\t{}\t{}\t{}\t{}",
            s.utterances,
            s.tokens,
            s.l0_tokens,
            s.l1_tokens,
            oov_count(&vocab, &encoded)
        ));
    }
    write_tsv(
        &exp.report_path("corpus_stats.tsv"),
        STATS_HEADER,
        &stats_rows,
    )?;

    if let Some(fpath) = features {
        // Rows align with the input corpus; validate once against the whole
        // encoded corpus, then partition them exactly like the lines.
        let all: Vec<Utterance> = lines.iter().map(|(_, t)| vocab.encode(t)).collect();
        let ff = load_features(fpath, &all)?;
        let mut rows: [Vec<_>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (pos, &i) in order.iter().enumerate() {
            let slot = if pos < n_train {
                0
            } else if pos < n_train + n_dev {
                1
            } else {
                2
            };
            rows[slot].push(ff.rows[i].clone());
        }
        for (slot, name) in SPLIT_NAMES.iter().enumerate() {
            write_features(&exp.features_path(name), &ff.decls, &rows[slot])?;
        }
    }
    Ok(())
}
