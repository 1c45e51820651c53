//! Fixed-length ancestral sampling from a trained generator.

use sha2::{Digest, Sha256};

use crate::corpus::{Lang, Token, BOS};
use crate::model::{Lm, LmState};
use crate::numerics::{
    mask_renormalize, sample_categorical, save_params_to, softmax, Exec, RngState, Val, ValueExec,
};

/// A batch of generated sequences, all exactly the same length, tagged with
/// the parameter digest of the generator that produced them and the seed of
/// the draw.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub sequences: Vec<Vec<Token>>,
    pub generator_id: String,
    pub seed: u64,
}

/// Content hash of a model's parameters. Ties sample files and checkpoint
/// rounds back to the exact generator state that produced them.
pub fn params_digest(lm: &Lm) -> String {
    let mut buf = Vec::new();
    save_params_to(&mut buf, lm.ps()).expect("in-memory serialization cannot fail");
    let digest = Sha256::digest(&buf);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The BOS step that opens every sampled sequence. BOS is language-neutral;
/// sampling fixes the leading selector to L0 so draws are reproducible and
/// comparable across generators.
pub(crate) fn bos_step<E: Exec>(lm: &Lm, ex: &mut E) -> (LmState<E::V>, E::V) {
    let state = lm.zero_state(ex);
    lm.step(ex, Lang::L0, BOS, None, &state)
}

/// Draws the next token from a logits vector with EOS renormalized away.
/// Every draw is a real token or an unknown bucket, never BOS/EOS/dummy.
pub(crate) fn draw_token(lm: &Lm, ex: &ValueExec, logits: Val, rng: &mut RngState) -> Token {
    let probs = softmax(ex.value(logits).data());
    let eos = probs.len() - 1;
    let probs = mask_renormalize(&probs, &[eos]).expect("mass remains after masking EOS");
    let s = sample_categorical(&probs, rng).expect("masked distribution sums to one");
    let index = lm.layout().from_scorable(s);
    let lang = lm
        .layout()
        .lang_of(index)
        .expect("non-EOS scorables carry a language");
    Token { lang, index }
}

/// Extends a partial sequence by `need` sampled tokens, starting from the
/// given state and next-token logits. Each drawn token's language selects
/// the routing of the step that consumes it.
pub(crate) fn extend_sampled(
    lm: &Lm,
    ex: &mut ValueExec,
    state: LmState<Val>,
    logits: Val,
    need: usize,
    rng: &mut RngState,
    out: &mut Vec<Token>,
) {
    let mut state = state;
    let mut logits = logits;
    for i in 0..need {
        let t = draw_token(lm, ex, logits, rng);
        out.push(t);
        if i + 1 < need {
            let (next, l) = lm.step(ex, t.lang, t.index, None, &state);
            state = next;
            logits = l;
        }
    }
}

/// Draws `n` sequences of exactly `len` tokens each. EOS is renormalized
/// out of every step, so sequences never terminate early. Deterministic
/// given the seed.
pub fn sample_sequences(lm: &Lm, n: usize, len: usize, seed: u64) -> SampleSet {
    assert!(len >= 2, "sample length must be at least 2");
    let mut rng = RngState::seeded(seed);
    let mut ex = ValueExec::new();
    let mut sequences = Vec::with_capacity(n);
    for _ in 0..n {
        ex.reset();
        let (state, logits) = bos_step(lm, &mut ex);
        let mut seq = Vec::with_capacity(len);
        extend_sampled(lm, &mut ex, state, logits, len, &mut rng, &mut seq);
        sequences.push(seq);
    }
    SampleSet {
        sequences,
        generator_id: params_digest(lm),
        seed,
    }
}
