//! Checkpoint evaluation: perplexity on a split, optionally decomposed by
//! language-transition class.

use std::path::Path;

use cslm_core::corpus::FeatureDecl;
use cslm_core::model::{load_model, Lm};
use cslm_core::training::{decomposed_perplexity, Decomposition, TransitionClass};

use crate::exp::ExperimentDir;
use crate::report::{fmt_opt, write_tsv};
use crate::Failure;

pub const EVAL_HEADER: &str = "class\tcount\tppl";

/// A model whose only channel is the language bit can be fed on any split;
/// anything else needs the split's own feature sidecar.
fn wants_derived_lang(lm: &Lm) -> bool {
    lm.features().len() == 1 && lm.features()[0].name == "lang"
}

fn check_decls(lm: &Lm, decls: &[FeatureDecl]) -> Result<(), Failure> {
    let model: Vec<(&str, usize)> = lm
        .features()
        .iter()
        .map(|c| (c.name.as_str(), c.cardinality))
        .collect();
    let data: Vec<(&str, usize)> = decls
        .iter()
        .map(|d| (d.name.as_str(), d.cardinality))
        .collect();
    if !model.is_empty() && !data.is_empty() && model != data {
        return Err(Failure::Data(format!(
            "feature channels {data:?} do not match the checkpoint's {model:?}"
        )));
    }
    Ok(())
}

pub fn decomposition_rows(dec: &Decomposition, decompose: bool) -> Vec<String> {
    let overall_count = dec.scored_tokens() + dec.eos.count;
    let mut rows = vec![format!(
        "overall\t{overall_count}\t{}",
        fmt_opt(Some(dec.overall()))
    )];
    if decompose {
        for c in TransitionClass::ALL {
            let s = dec.class(c);
            rows.push(format!("{}\t{}\t{}", c.label(), s.count, fmt_opt(s.ppl())));
        }
        rows.push(format!(
            "eos\t{}\t{}",
            dec.eos.count,
            fmt_opt(dec.eos.ppl())
        ));
    }
    rows
}

pub fn cmd_eval(
    exp_root: &Path,
    checkpoint: &Path,
    split: &str,
    decompose: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let exp = ExperimentDir::new(exp_root);
    let (vocab, digest) = exp.vocab()?;
    let lm = load_model(checkpoint, Some(&digest))?;
    let sidecar = exp.features_path(split).exists();
    let (utts, decls) = exp.load_split(split, &vocab, wants_derived_lang(&lm) && !sidecar)?;
    check_decls(&lm, &decls)?;
    if !lm.features().is_empty() && decls.is_empty() {
        eprintln!(
            "note: checkpoint declares feature channels but {split} has no features; \
             scoring with zero feature vectors"
        );
    }

    let dec = decomposed_perplexity(&lm, &utts)?;
    let rows = decomposition_rows(&dec, decompose);
    let default_path = exp.report_path(&format!("eval_{split}.tsv"));
    let path = out.unwrap_or(&default_path);
    write_tsv(path, EVAL_HEADER, &rows)?;
    eprintln!("{split} perplexity {}", dec.overall());
    Ok(())
}
