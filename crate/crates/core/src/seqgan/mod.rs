//! Adversarial generator training and same-source data augmentation.
//!
//! A generator language model is pretrained by MLE, then refined with
//! policy gradients against an LSTM discriminator that separates real
//! utterances from samples; rewards for unfinished prefixes come from
//! Monte-Carlo rollouts. Text sampled from the resulting generator serves
//! as pretraining data for a fresh language model, which is then fine-tuned
//! on the real corpus.

mod disc;
mod novelty;
mod pipeline;
mod reward;
mod sample;

pub use disc::{train_discriminator, DiscOptions, DiscReport, Discriminator};
pub use novelty::ngram_novelty;
pub use pipeline::{
    same_source_pretrain, same_source_pretrain_with, seqgan_train, seqgan_train_with, GanConfig,
    GanOutcome, GanRoundLog,
    SameSourceOutcome,
};
pub use reward::{exact_rollout_reward, policy_gradient_step, rollout_reward, EmaBaseline};
pub use sample::{params_digest, sample_sequences, SampleSet};
