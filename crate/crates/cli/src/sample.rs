//! Sampling from a checkpoint, with n-gram novelty against the train split.

use std::path::Path;

use cslm_core::corpus::{Token, Vocabulary};
use cslm_core::model::load_model;
use cslm_core::seqgan::{ngram_novelty, sample_sequences, SampleSet};
use cslm_core::training::TrainError;

use crate::exp::ExperimentDir;
use crate::report::write_tsv;
use crate::Failure;

pub const NOVELTY_HEADER: &str = "n\tnovel_pct";

pub fn decode_lines(vocab: &Vocabulary, sequences: &[Vec<Token>]) -> String {
    let mut text = String::new();
    for seq in sequences {
        let words: Vec<&str> = seq.iter().map(|t| vocab.surface(t.index)).collect();
        text.push_str(&words.join(" "));
        text.push('\n');
    }
    text
}

/// Novelty rows for 2-, 3- and 4-grams. A generated set too short to
/// contain any n-grams reports n/a instead of failing the run.
pub fn novelty_rows(
    generated: &[Vec<Token>],
    train: &[cslm_core::corpus::Utterance],
) -> Result<Vec<String>, Failure> {
    let mut rows = Vec::with_capacity(3);
    for n in 2..=4 {
        match ngram_novelty(generated, train, n) {
            Ok(pct) => rows.push(format!("{n}\t{pct}")),
            Err(TrainError::NoNgrams(_)) => rows.push(format!("{n}\tn/a")),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(rows)
}

fn write_meta(path: &Path, set: &SampleSet, len: usize) -> std::io::Result<()> {
    let text = format!(
        "generator {}\nseed {}\nlen {}\nn {}\n",
        set.generator_id,
        set.seed,
        len,
        set.sequences.len()
    );
    std::fs::write(path, text)
}

pub fn cmd_sample(
    exp_root: &Path,
    checkpoint: &Path,
    n: usize,
    len: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if len < 2 {
        return Err(Failure::Config(format!(
            "--len must be at least 2, got {len}"
        )));
    }
    let exp = ExperimentDir::new(exp_root);
    let (vocab, digest) = exp.vocab()?;
    let lm = load_model(checkpoint, Some(&digest))?;

    let set = sample_sequences(&lm, n, len, seed);
    let default_path = exp.report_path("samples.txt");
    let path = out.unwrap_or(&default_path);
    std::fs::write(path, decode_lines(&vocab, &set.sequences))?;
    let mut meta_name = path.as_os_str().to_owned();
    meta_name.push(".meta");
    write_meta(Path::new(&meta_name), &set, len)?;

    let (train, _) = exp.load_split("train", &vocab, false)?;
    let rows = novelty_rows(&set.sequences, &train)?;
    write_tsv(&exp.report_path("novelty.tsv"), NOVELTY_HEADER, &rows)?;
    Ok(())
}
