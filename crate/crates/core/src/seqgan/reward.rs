//! Discriminator-derived rewards and the policy-gradient generator update.

use crate::corpus::Token;
use crate::model::Lm;
use crate::numerics::{mask_renormalize, softmax, Exec, RngState, Tape, ValueExec};
use crate::training::{sgd_step, TrainError};

use super::disc::Discriminator;
use super::sample::{bos_step, extend_sampled};

const CLIP: f64 = 5.0;

/// Reward for the token at position `prefix.len()` of a sequence being
/// grown to `sample_len` tokens. Interior positions average the
/// discriminator's score over `n_rollouts` sampled completions; the final
/// position scores the finished sequence directly, with no sampling.
pub fn rollout_reward(
    gen: &Lm,
    disc: &Discriminator,
    prefix: &[Token],
    sample_len: usize,
    n_rollouts: usize,
    rng: &mut RngState,
) -> f64 {
    assert!(
        (1..=sample_len).contains(&prefix.len()),
        "prefix of {} for sample length {sample_len}",
        prefix.len()
    );
    assert!(n_rollouts >= 1, "need at least one rollout");
    if prefix.len() == sample_len {
        return disc.prob(prefix);
    }
    let mut gen_ex = ValueExec::new();
    let (mut state, mut logits) = bos_step(gen, &mut gen_ex);
    for t in prefix {
        let (next, l) = gen.step(&mut gen_ex, t.lang, t.index, None, &state);
        state = next;
        logits = l;
    }
    let mut disc_ex = ValueExec::new();
    let mut sum = 0.0;
    let mut buf = Vec::with_capacity(sample_len);
    for _ in 0..n_rollouts {
        buf.clear();
        buf.extend_from_slice(prefix);
        extend_sampled(
            gen,
            &mut gen_ex,
            state,
            logits,
            sample_len - prefix.len(),
            rng,
            &mut buf,
        );
        sum += disc.prob_with(&mut disc_ex, &buf);
    }
    sum / n_rollouts as f64
}

/// Exact expectation of the rollout reward, by enumerating every completion
/// of the prefix. Exponential in the remaining length; meant for validating
/// the Monte-Carlo estimate on toy vocabularies.
pub fn exact_rollout_reward(
    gen: &Lm,
    disc: &Discriminator,
    prefix: &[Token],
    sample_len: usize,
) -> f64 {
    assert!(
        (1..=sample_len).contains(&prefix.len()),
        "prefix of {} for sample length {sample_len}",
        prefix.len()
    );
    if prefix.len() == sample_len {
        return disc.prob(prefix);
    }
    let mut gen_ex = ValueExec::new();
    let (mut state, mut logits) = bos_step(gen, &mut gen_ex);
    for t in prefix {
        let (next, l) = gen.step(&mut gen_ex, t.lang, t.index, None, &state);
        state = next;
        logits = l;
    }
    let mut buf = prefix.to_vec();
    let mut disc_ex = ValueExec::new();
    expect_completion(
        gen,
        disc,
        &mut gen_ex,
        &mut disc_ex,
        state,
        logits,
        &mut buf,
        sample_len,
    )
}

#[allow(clippy::too_many_arguments)]
fn expect_completion(
    gen: &Lm,
    disc: &Discriminator,
    gen_ex: &mut ValueExec,
    disc_ex: &mut ValueExec,
    state: crate::model::LmState<crate::numerics::Val>,
    logits: crate::numerics::Val,
    buf: &mut Vec<Token>,
    sample_len: usize,
) -> f64 {
    if buf.len() == sample_len {
        return disc.prob_with(disc_ex, buf);
    }
    let probs = softmax(gen_ex.value(logits).data());
    let eos = probs.len() - 1;
    let probs = mask_renormalize(&probs, &[eos]).expect("mass remains after masking EOS");
    let layout = gen.layout();
    let mut acc = 0.0;
    for (s, p) in probs.iter().enumerate().take(eos) {
        if *p == 0.0 {
            continue;
        }
        let index = layout.from_scorable(s);
        let lang = layout.lang_of(index).expect("scorable below EOS has a language");
        let (next, l) = gen.step(gen_ex, lang, index, None, &state);
        buf.push(Token { lang, index });
        acc += p * expect_completion(gen, disc, gen_ex, disc_ex, next, l, buf, sample_len);
        buf.pop();
    }
    acc
}

/// Exponential moving average of batch mean rewards. The first observation
/// seeds the average, so early updates are centered rather than dragged
/// toward an arbitrary initial constant.
#[derive(Clone, Copy, Debug)]
pub struct EmaBaseline {
    decay: f64,
    value: Option<f64>,
}

impl EmaBaseline {
    pub fn new(decay: f64) -> Self {
        assert!((0.0..1.0).contains(&decay), "decay must be in [0, 1)");
        EmaBaseline { decay, value: None }
    }

    /// Folds in one batch mean and returns the baseline to center with.
    pub fn observe(&mut self, batch_mean: f64) -> f64 {
        let v = match self.value {
            None => batch_mean,
            Some(prev) => self.decay * prev + (1.0 - self.decay) * batch_mean,
        };
        self.value = Some(v);
        v
    }

    pub fn current(&self) -> Option<f64> {
        self.value
    }
}

/// One REINFORCE update: descend on Σ_t (reward_t − baseline)·nll_t averaged
/// over the batch, which ascends advantage-weighted log likelihood of the
/// sampled tokens. The nll terms use the EOS-masked distribution the tokens
/// were actually drawn from, so the gradient matches the sampling policy
/// exactly. Rewards equal to the baseline produce a bitwise no-op.
pub fn policy_gradient_step(
    gen: &mut Lm,
    batch: &[(Vec<Token>, Vec<f64>)],
    lr: f64,
    baseline: f64,
) -> Result<(), TrainError> {
    assert!(!batch.is_empty(), "empty policy-gradient batch");
    let layout = gen.layout();
    let eos = layout.scorable_count() - 1;
    let mut tape = Tape::new();
    let mut terms = Vec::new();
    for (seq, rewards) in batch {
        assert_eq!(
            seq.len(),
            rewards.len(),
            "one reward per sampled position"
        );
        assert!(!seq.is_empty(), "empty sampled sequence");
        let (mut state, mut logits) = bos_step(gen, &mut tape);
        for (i, t) in seq.iter().enumerate() {
            let target = layout
                .to_scorable(t.index)
                .expect("sampled tokens are scorable");
            let nll = tape.nll_masked(logits, target, eos);
            terms.push(tape.scale(nll, rewards[i] - baseline));
            if i + 1 < seq.len() {
                let (next, l) = gen.step(&mut tape, t.lang, t.index, None, &state);
                state = next;
                logits = l;
            }
        }
    }
    let mut acc = terms[0];
    for t in &terms[1..] {
        acc = tape.add(acc, *t);
    }
    let objective = tape.scale(acc, 1.0 / batch.len() as f64);
    if !tape.item(objective).is_finite() {
        return Err(TrainError::NonFinite("policy-gradient objective".into()));
    }
    tape.backward(objective, gen.ps_mut());
    sgd_step(gen.ps_mut(), lr, CLIP)
}
