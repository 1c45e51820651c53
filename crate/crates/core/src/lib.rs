//! Language modeling for code-switched text.
//!
//! The crate trains and evaluates word-level recurrent language models on
//! text that alternates between two languages inside a single utterance.
//! It provides:
//!
//! - a corpus layer: script-based tokenization, a two-language vocabulary,
//!   deterministic splits, and a synthetic corpus generator;
//! - an exact-arithmetic numerics layer with reverse-mode gradients;
//! - two model families: a standard LSTM language model over the union
//!   vocabulary, and a dual-cell model that routes each token through a
//!   per-language LSTM while conditioning the other cell on a dummy input;
//! - maximum-likelihood training with gradient clipping and a decaying
//!   learning-rate schedule, plus scheduled sampling;
//! - an adversarial fine-tuning loop (generator/discriminator with Monte
//!   Carlo rollouts) and same-source data augmentation built on it;
//! - evaluation: perplexity, perplexity decomposed by language-transition
//!   class, and n-gram novelty of generated text.
//!
//! Everything is deterministic given a seed, with or without the `parallel`
//! feature.

pub mod corpus;
pub mod model;
pub mod numerics;
pub mod parallel;
pub mod seqgan;
pub mod training;
