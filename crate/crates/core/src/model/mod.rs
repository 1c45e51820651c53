//! Language models over the merged two-language vocabulary.
//!
//! Both families step one token at a time and score the same target set:
//! every real token of both languages, the two unknown buckets, and EOS
//! (the "scorable union"). BOS, per-language dummies, and EOS are inputs
//! or structural rows only and never receive probability mass as inputs.

mod checkpoint;
mod dual;
mod features;
mod lstm;
mod rnnlm;

pub use checkpoint::{file_sha256, load_model, save_model, CheckpointError, ModelKind};
pub use dual::{DualLm, DualSnapshot, DualState};
pub use features::{FeatureChannel, FEATURE_WIDTH, LANG_FEATURE_WIDTH};
pub use lstm::{CellSnapshot, CellState, LstmCell};
pub use rnnlm::Rnnlm;

use crate::corpus::{FeatureDecl, FeatureVector, Lang, Layout, Utterance, BOS};
use crate::numerics::{Exec, ParamSet, RngState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub embed: usize,
    pub hidden: usize,
}

#[derive(Clone, Debug)]
pub enum Lm {
    Dual(DualLm),
    Rnn(Rnnlm),
}

#[derive(Clone, Copy, Debug)]
pub enum LmState<V> {
    Dual(DualState<V>),
    Rnn(CellState<V>),
}

#[derive(Clone, Debug)]
pub enum LmSnapshot {
    Dual(DualSnapshot),
    Rnn(CellSnapshot),
}

impl Lm {
    pub fn new(
        kind: ModelKind,
        layout: Layout,
        dims: ModelDims,
        feature_decls: &[FeatureDecl],
        rng: &mut RngState,
    ) -> Self {
        match kind {
            ModelKind::Dual => Lm::Dual(DualLm::new(layout, dims, feature_decls, rng)),
            ModelKind::Rnn => Lm::Rnn(Rnnlm::new(layout, dims, feature_decls, rng)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Lm::Dual(_) => ModelKind::Dual,
            Lm::Rnn(_) => ModelKind::Rnn,
        }
    }

    pub fn ps(&self) -> &ParamSet {
        match self {
            Lm::Dual(m) => &m.ps,
            Lm::Rnn(m) => &m.ps,
        }
    }

    pub fn ps_mut(&mut self) -> &mut ParamSet {
        match self {
            Lm::Dual(m) => &mut m.ps,
            Lm::Rnn(m) => &mut m.ps,
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            Lm::Dual(m) => m.layout,
            Lm::Rnn(m) => m.layout,
        }
    }

    pub fn dims(&self) -> ModelDims {
        match self {
            Lm::Dual(m) => m.dims,
            Lm::Rnn(m) => m.dims,
        }
    }

    pub fn features(&self) -> &[FeatureChannel] {
        match self {
            Lm::Dual(m) => &m.features,
            Lm::Rnn(m) => &m.features,
        }
    }

    pub fn zero_state<E: Exec>(&self, ex: &mut E) -> LmState<E::V> {
        match self {
            Lm::Dual(m) => LmState::Dual(m.zero_state(ex)),
            Lm::Rnn(m) => LmState::Rnn(m.zero_state(ex)),
        }
    }

    /// One step. `selector` is the consumed token's language bit; for BOS
    /// it must be the language of the utterance's first token. The baseline
    /// model has no routing and ignores it.
    pub fn step<E: Exec>(
        &self,
        ex: &mut E,
        selector: Lang,
        index: usize,
        features: Option<&FeatureVector>,
        state: &LmState<E::V>,
    ) -> (LmState<E::V>, E::V) {
        match (self, state) {
            (Lm::Dual(m), LmState::Dual(s)) => {
                let (next, logits) = m.step(ex, selector, index, features, s);
                (LmState::Dual(next), logits)
            }
            (Lm::Rnn(m), LmState::Rnn(s)) => {
                let (next, logits) = m.step(ex, index, features, s);
                (LmState::Rnn(next), logits)
            }
            _ => panic!("state from a different model family"),
        }
    }

    pub fn snapshot<E: Exec>(&self, ex: &E, s: &LmState<E::V>) -> LmSnapshot {
        match (self, s) {
            (Lm::Dual(m), LmState::Dual(s)) => LmSnapshot::Dual(m.snapshot(ex, s)),
            (Lm::Rnn(m), LmState::Rnn(s)) => LmSnapshot::Rnn(m.snapshot(ex, s)),
            _ => panic!("state from a different model family"),
        }
    }

    pub fn inject<E: Exec>(&self, ex: &mut E, snap: &LmSnapshot) -> LmState<E::V> {
        match (self, snap) {
            (Lm::Dual(m), LmSnapshot::Dual(s)) => LmState::Dual(m.inject(ex, s)),
            (Lm::Rnn(m), LmSnapshot::Rnn(s)) => LmState::Rnn(m.inject(ex, s)),
            _ => panic!("snapshot from a different model family"),
        }
    }
}

/// Per-position negative log likelihoods for one utterance.
///
/// The model consumes BOS, t1, .., tn and predicts t1, .., tn, EOS, so an
/// n-token utterance yields n+1 values. The BOS step's selector is the
/// language of t1. Feature vectors ride with the consumed token; BOS
/// carries none.
pub fn sequence_nlls<E: Exec>(lm: &Lm, ex: &mut E, utt: &Utterance) -> Vec<E::V> {
    assert!(!utt.tokens.is_empty(), "cannot score an empty utterance");
    let layout = lm.layout();
    let mut state = lm.zero_state(ex);
    let mut nlls = Vec::with_capacity(utt.tokens.len() + 1);
    for i in 0..=utt.tokens.len() {
        let (selector, index, feats) = if i == 0 {
            (utt.tokens[0].lang, BOS, None)
        } else {
            let t = &utt.tokens[i - 1];
            (t.lang, t.index, utt.features.as_ref().map(|f| &f[i - 1]))
        };
        let (next, logits) = lm.step(ex, selector, index, feats, &state);
        state = next;
        let target = if i < utt.tokens.len() {
            layout
                .to_scorable(utt.tokens[i].index)
                .expect("prediction targets must be scorable")
        } else {
            layout.scorable_count() - 1
        };
        nlls.push(ex.nll(logits, target));
    }
    nlls
}

/// Summed NLL and the number of predicted positions (tokens + EOS).
pub fn sequence_nll<E: Exec>(lm: &Lm, ex: &mut E, utt: &Utterance) -> (E::V, usize) {
    let nlls = sequence_nlls(lm, ex, utt);
    let n = nlls.len();
    let mut acc = nlls[0];
    for v in &nlls[1..] {
        acc = ex.add(acc, *v);
    }
    (acc, n)
}
