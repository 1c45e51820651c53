//! Perplexity, and its decomposition by language-transition class.

use crate::corpus::{Lang, Utterance};
use crate::model::{sequence_nlls, Lm};
use crate::numerics::{Exec, ValueExec};
use crate::parallel::map_ordered;

use super::TrainError;

/// Utterances per evaluation work unit. Each unit gets its own executor and
/// reduces sequentially, so results do not depend on worker count.
pub const EVAL_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransitionClass {
    L0L0,
    L0L1,
    L1L0,
    L1L1,
    /// First token of an utterance: no preceding token to transition from.
    Initial,
}

impl TransitionClass {
    pub const ALL: [TransitionClass; 5] = [
        TransitionClass::L0L0,
        TransitionClass::L0L1,
        TransitionClass::L1L0,
        TransitionClass::L1L1,
        TransitionClass::Initial,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            TransitionClass::L0L0 => "l0-l0",
            TransitionClass::L0L1 => "l0-l1",
            TransitionClass::L1L0 => "l1-l0",
            TransitionClass::L1L1 => "l1-l1",
            TransitionClass::Initial => "initial",
        }
    }

    pub fn of(prev: Option<Lang>, cur: Lang) -> TransitionClass {
        match (prev, cur) {
            (None, _) => TransitionClass::Initial,
            (Some(Lang::L0), Lang::L0) => TransitionClass::L0L0,
            (Some(Lang::L0), Lang::L1) => TransitionClass::L0L1,
            (Some(Lang::L1), Lang::L0) => TransitionClass::L1L0,
            (Some(Lang::L1), Lang::L1) => TransitionClass::L1L1,
        }
    }

    fn slot(&self) -> usize {
        Self::ALL.iter().position(|c| c == self).unwrap()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassStat {
    pub nll_sum: f64,
    pub count: usize,
}

impl ClassStat {
    fn add(&mut self, nll: f64) {
        self.nll_sum += nll;
        self.count += 1;
    }

    /// Per-class perplexity; None when the class is empty ("n/a" in reports).
    pub fn ppl(&self) -> Option<f64> {
        (self.count > 0).then(|| ppl_from(self.nll_sum, self.count))
    }
}

/// Token-level scores split by (previous language, current language), with
/// EOS predictions pooled separately: end-of-utterance events are not
/// transitions between languages.
#[derive(Clone, Debug, Default)]
pub struct Decomposition {
    classes: [ClassStat; 5],
    pub eos: ClassStat,
}

impl Decomposition {
    pub fn class(&self, c: TransitionClass) -> &ClassStat {
        &self.classes[c.slot()]
    }

    /// All pools together reproduce the plain perplexity.
    pub fn overall(&self) -> f64 {
        let nll: f64 = self.classes.iter().map(|c| c.nll_sum).sum::<f64>() + self.eos.nll_sum;
        let n: usize = self.classes.iter().map(|c| c.count).sum::<usize>() + self.eos.count;
        ppl_from(nll, n)
    }

    pub fn scored_tokens(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }
}

pub fn ppl_from(nll_sum: f64, n: usize) -> f64 {
    assert!(n > 0, "perplexity over zero predictions");
    (nll_sum / n as f64).exp()
}

/// Per-step NLL traces for every utterance, fanned out chunk-wise.
fn nll_traces(lm: &Lm, utts: &[Utterance]) -> Vec<Vec<f64>> {
    let chunks: Vec<&[Utterance]> = utts.chunks(EVAL_CHUNK).collect();
    let per_chunk = map_ordered(&chunks, |chunk| {
        let mut ex = ValueExec::new();
        chunk
            .iter()
            .map(|u| {
                ex.reset();
                sequence_nlls(lm, &mut ex, u)
                    .into_iter()
                    .map(|v| ex.item(v))
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    });
    per_chunk.into_iter().flatten().collect()
}

/// exp of the mean per-token NLL over `utts`; every real token plus one EOS
/// prediction per utterance counts.
pub fn perplexity(lm: &Lm, utts: &[Utterance]) -> Result<f64, TrainError> {
    if utts.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    let traces = nll_traces(lm, utts);
    let nll: f64 = traces.iter().flatten().sum();
    let n: usize = traces.iter().map(|t| t.len()).sum();
    Ok(ppl_from(nll, n))
}

pub fn decomposed_perplexity(lm: &Lm, utts: &[Utterance]) -> Result<Decomposition, TrainError> {
    if utts.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    let traces = nll_traces(lm, utts);
    let mut dec = Decomposition::default();
    for (u, trace) in utts.iter().zip(traces) {
        for (i, nll) in trace.iter().enumerate() {
            if i == u.tokens.len() {
                dec.eos.add(*nll);
            } else {
                let prev = (i > 0).then(|| u.tokens[i - 1].lang);
                let class = TransitionClass::of(prev, u.tokens[i].lang);
                dec.classes[class.slot()].add(*nll);
            }
        }
    }
    Ok(dec)
}
