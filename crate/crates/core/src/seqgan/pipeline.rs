//! The adversarial training loop and the same-source pretraining pipeline
//! built on top of it.

use std::time::Instant;

use crate::corpus::{CorpusSplit, Lang, Token, Utterance, EOS};
use crate::model::{Lm, ModelDims, ModelKind};
use crate::numerics::RngState;
use crate::parallel::map_ordered;
use crate::training::{
    pretrain_then_finetune, train_mle, EpochLog, PhasedLogs, TrainConfig, TrainError,
};

use super::disc::{train_discriminator, DiscOptions, Discriminator};
use super::reward::{policy_gradient_step, rollout_reward, EmaBaseline};
use super::sample::{sample_sequences, SampleSet};

#[derive(Clone, Debug)]
pub struct GanConfig {
    /// Fixed length of every sampled sequence.
    pub sample_len: usize,
    /// Monte-Carlo completions per interior position.
    pub n_rollouts: usize,
    /// Generator policy-gradient updates per round.
    pub g_steps: usize,
    /// Discriminator minibatch updates per round.
    pub d_steps: usize,
    /// Adversarial rounds; zero stops after MLE pretraining.
    pub n_rounds: usize,
    /// Teacher-forced epochs before the adversarial phase.
    pub mle_pretrain_epochs: usize,
    /// Sampled pretraining data volume, in multiples of the train set's
    /// token count.
    pub sample_multiplier: usize,
    pub seed: u64,
    /// Sequences per policy-gradient update.
    pub g_batch: usize,
    /// Discriminator minibatch size, half real half fake.
    pub d_batch: usize,
    pub g_lr: f64,
    pub d_lr: f64,
    pub baseline_decay: f64,
    pub d_holdout_frac: f64,
    /// Discriminator steps before the first round.
    pub d_pretrain_steps: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            sample_len: 20,
            n_rollouts: 4,
            g_steps: 1,
            d_steps: 3,
            n_rounds: 20,
            mle_pretrain_epochs: 30,
            sample_multiplier: 3,
            seed: 0,
            g_batch: 16,
            d_batch: 32,
            g_lr: 0.05,
            d_lr: 0.1,
            baseline_decay: 0.9,
            d_holdout_frac: 0.2,
            d_pretrain_steps: 30,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::BadConfig(m.into()));
        if self.sample_len < 2 {
            return bad("sample_len must be at least 2");
        }
        if self.n_rollouts == 0 {
            return bad("n_rollouts must be at least 1");
        }
        if self.n_rounds > 0 && self.g_steps == 0 {
            return bad("adversarial rounds need g_steps >= 1");
        }
        if self.g_batch == 0 || self.d_batch < 2 {
            return bad("batch sizes too small");
        }
        if !(self.g_lr > 0.0 && self.d_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline_decay must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.d_holdout_frac) {
            return bad("d_holdout_frac must be in [0, 1)");
        }
        Ok(())
    }

    /// The teacher-forced phase of adversarial training: same recipe as
    /// regular MLE, no learning-rate decay.
    pub fn mle_config(&self) -> TrainConfig {
        TrainConfig {
            total_epochs: self.mle_pretrain_epochs,
            decay_start_epoch: self.mle_pretrain_epochs,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct GanRoundLog {
    pub round: usize,
    /// Mean rollout reward across the round's generator batches.
    pub mean_reward: f64,
    /// Baseline after the round's last update.
    pub baseline: f64,
    /// Discriminator held-out accuracy, absent when d_steps is zero.
    pub disc_accuracy: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GanOutcome {
    pub mle: Vec<EpochLog>,
    /// Held-out accuracy after discriminator pretraining.
    pub initial_disc_accuracy: Option<f64>,
    pub rounds: Vec<GanRoundLog>,
}

fn mix(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Crops or EOS-pads an utterance to exactly `len` tokens for the
/// discriminator, which wants fixed-length input on both classes.
fn crop_pad(u: &Utterance, len: usize) -> Vec<Token> {
    let mut seq: Vec<Token> = u.tokens.iter().take(len).copied().collect();
    while seq.len() < len {
        seq.push(Token {
            lang: Lang::L0,
            index: EOS,
        });
    }
    seq
}

pub fn seqgan_train(
    lm: &mut Lm,
    split: &CorpusSplit,
    cfg: &GanConfig,
) -> Result<GanOutcome, TrainError> {
    seqgan_train_with(lm, split, cfg, |_, _, _| Ok(()))
}

/// Full adversarial pipeline: MLE-pretrain the generator, pretrain the
/// discriminator against initial samples, then alternate policy-gradient
/// and discriminator updates. The hook runs after every round with the
/// current generator, for checkpointing.
pub fn seqgan_train_with(
    lm: &mut Lm,
    split: &CorpusSplit,
    cfg: &GanConfig,
    mut on_round: impl FnMut(usize, &Lm, &GanRoundLog) -> Result<(), TrainError>,
) -> Result<GanOutcome, TrainError> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let mle = if cfg.mle_pretrain_epochs > 0 {
        train_mle(lm, split, &cfg.mle_config())?
    } else {
        Vec::new()
    };
    if cfg.n_rounds == 0 {
        return Ok(GanOutcome {
            mle,
            initial_disc_accuracy: None,
            rounds: Vec::new(),
        });
    }

    let real: Vec<Vec<Token>> = split
        .train
        .iter()
        .map(|u| crop_pad(u, cfg.sample_len))
        .collect();
    let d_opts = DiscOptions {
        lr: cfg.d_lr,
        batch: cfg.d_batch,
        holdout_frac: cfg.d_holdout_frac,
    };
    let mut disc_rng = RngState::seeded(mix(cfg.seed, 0xD15C));
    let mut disc = Discriminator::new(lm.layout(), lm.dims(), &mut disc_rng);
    let fake0 = sample_sequences(lm, real.len(), cfg.sample_len, mix(cfg.seed, 0xF0F0));
    let initial = train_discriminator(
        &mut disc,
        &real,
        &fake0.sequences,
        cfg.d_pretrain_steps,
        &d_opts,
        &mut disc_rng,
    )?;

    let mut baseline = EmaBaseline::new(cfg.baseline_decay);
    let mut rounds = Vec::with_capacity(cfg.n_rounds);
    for round in 1..=cfg.n_rounds {
        let t0 = Instant::now();
        let mut reward_sum = 0.0;
        let mut reward_n = 0usize;
        let mut last_baseline = baseline.current().unwrap_or(0.5);
        for g_step in 0..cfg.g_steps {
            let step_seed = mix(cfg.seed, ((round as u64) << 20) | ((g_step as u64) << 8));
            let sampled =
                sample_sequences(lm, cfg.g_batch, cfg.sample_len, mix(step_seed, 0x5EED));
            // Per-sequence reward passes are independent; each gets its own
            // seeded stream so the result is identical however the work is
            // scheduled.
            let gen: &Lm = lm;
            let idx: Vec<usize> = (0..sampled.sequences.len()).collect();
            let rewards: Vec<Vec<f64>> = map_ordered(&idx, |&i| {
                let seq = &sampled.sequences[i];
                let mut rng = RngState::seeded(mix(step_seed, 0x7200 + i as u64));
                (1..=seq.len())
                    .map(|t| {
                        rollout_reward(gen, &disc, &seq[..t], cfg.sample_len, cfg.n_rollouts, &mut rng)
                    })
                    .collect()
            });
            let step_sum: f64 = rewards.iter().flatten().sum();
            let step_n: usize = rewards.iter().map(|r| r.len()).sum();
            reward_sum += step_sum;
            reward_n += step_n;
            last_baseline = baseline.observe(step_sum / step_n as f64);
            let batch: Vec<(Vec<Token>, Vec<f64>)> = sampled
                .sequences
                .into_iter()
                .zip(rewards)
                .collect();
            policy_gradient_step(lm, &batch, cfg.g_lr, last_baseline)?;
        }

        let disc_accuracy = if cfg.d_steps > 0 {
            let n_fake = (cfg.d_batch * cfg.d_steps).max(cfg.d_batch);
            let fake = sample_sequences(
                lm,
                n_fake,
                cfg.sample_len,
                mix(cfg.seed, 0xFA4E ^ ((round as u64) << 32)),
            );
            let report = train_discriminator(
                &mut disc,
                &real,
                &fake.sequences,
                cfg.d_steps,
                &d_opts,
                &mut disc_rng,
            )?;
            Some(report.holdout_accuracy)
        } else {
            None
        };

        let log = GanRoundLog {
            round,
            mean_reward: reward_sum / reward_n as f64,
            baseline: last_baseline,
            disc_accuracy,
            seconds: t0.elapsed().as_secs_f64(),
        };
        on_round(round, lm, &log)?;
        rounds.push(log);
    }
    Ok(GanOutcome {
        mle,
        initial_disc_accuracy: Some(initial.holdout_accuracy),
        rounds,
    })
}

#[derive(Clone, Debug)]
pub struct SameSourceOutcome {
    /// Logs of the generator's adversarial training; absent when the
    /// multiplier is zero and no generator was trained.
    pub gan: Option<GanOutcome>,
    /// The generated pretraining corpus; absent when the multiplier is zero.
    pub samples: Option<SampleSet>,
    pub phased: PhasedLogs,
}

/// Same-source pretraining: train a fresh generator of `gen_kind` on the
/// train split (adversarially, or by plain MLE when `gan.n_rounds` is 0),
/// sample `sample_multiplier x train tokens / sample_len` sequences from
/// it, pretrain `lm` on those, then fine-tune on the real data. A zero
/// multiplier skips the generator entirely and degenerates to plain MLE.
pub fn same_source_pretrain(
    lm: &mut Lm,
    gen_kind: ModelKind,
    split: &CorpusSplit,
    gan: &GanConfig,
    cfg_pre: &TrainConfig,
    cfg_fine: &TrainConfig,
) -> Result<SameSourceOutcome, TrainError> {
    same_source_pretrain_with(lm, gen_kind, split, gan, cfg_pre, cfg_fine, |_, _, _| Ok(()))
}

/// `same_source_pretrain` with a per-round hook on the generator's
/// adversarial phase, for checkpointing.
pub fn same_source_pretrain_with(
    lm: &mut Lm,
    gen_kind: ModelKind,
    split: &CorpusSplit,
    gan: &GanConfig,
    cfg_pre: &TrainConfig,
    cfg_fine: &TrainConfig,
    on_round: impl FnMut(usize, &Lm, &GanRoundLog) -> Result<(), TrainError>,
) -> Result<SameSourceOutcome, TrainError> {
    gan.validate()?;
    if gan.sample_multiplier == 0 {
        let phased = pretrain_then_finetune(lm, &[], split, cfg_pre, cfg_fine)?;
        return Ok(SameSourceOutcome {
            gan: None,
            samples: None,
            phased,
        });
    }
    let dims: ModelDims = lm.dims();
    let mut gen_rng = RngState::seeded(mix(gan.seed, 0x6E67));
    let mut gen = Lm::new(gen_kind, lm.layout(), dims, &[], &mut gen_rng);
    let outcome = seqgan_train_with(&mut gen, split, gan, on_round)?;
    let n_tokens: usize = split.train.iter().map(|u| u.tokens.len()).sum();
    let n_samples = gan.sample_multiplier * n_tokens / gan.sample_len;
    let samples = sample_sequences(&gen, n_samples, gan.sample_len, mix(gan.seed, 0x5A3B));
    let corpus: Vec<Utterance> = samples
        .sequences
        .iter()
        .map(|s| Utterance {
            tokens: s.clone(),
            features: None,
        })
        .collect();
    let phased = pretrain_then_finetune(lm, &corpus, split, cfg_pre, cfg_fine)?;
    Ok(SameSourceOutcome {
        gan: Some(outcome),
        samples: Some(samples),
        phased,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, tokenize_utterance, Vocabulary};

    fn small_corpus() -> (Vocabulary, CorpusSplit) {
        let mut lines = Vec::new();
        for i in 0..16usize {
            let a = ["aa", "bb", "cc", "dd"][i % 4];
            let b = ["吃", "饭", "好", "家"][(i / 4) % 4];
            lines.push(format!("{a} {b} {a} {b} {a}"));
        }
        let surf: Vec<_> = lines
            .iter()
            .map(|l| tokenize_utterance(l).unwrap())
            .collect();
        let vocab = build_vocabulary(&surf, 1).unwrap();
        let utts: Vec<Utterance> = surf.iter().map(|s| vocab.encode(s)).collect();
        let split = CorpusSplit {
            train: utts.clone(),
            dev: utts[..4].to_vec(),
            test: Vec::new(),
            seed: 0,
        };
        (vocab, split)
    }

    fn model(vocab: &Vocabulary, seed: u64) -> Lm {
        let mut rng = RngState::seeded(seed);
        Lm::new(
            ModelKind::Dual,
            vocab.layout(),
            ModelDims { embed: 3, hidden: 4 },
            &[],
            &mut rng,
        )
    }

    fn small_gan() -> GanConfig {
        GanConfig {
            sample_len: 4,
            n_rollouts: 2,
            g_steps: 1,
            d_steps: 2,
            n_rounds: 2,
            mle_pretrain_epochs: 2,
            sample_multiplier: 1,
            seed: 5,
            g_batch: 3,
            d_batch: 4,
            d_pretrain_steps: 3,
            ..GanConfig::default()
        }
    }

    #[test]
    fn zero_rounds_is_exactly_mle() {
        let (vocab, split) = small_corpus();
        let cfg = GanConfig {
            n_rounds: 0,
            ..small_gan()
        };
        let mut adversarial = model(&vocab, 1);
        let outcome = seqgan_train(&mut adversarial, &split, &cfg).unwrap();
        assert!(outcome.rounds.is_empty());
        assert!(outcome.initial_disc_accuracy.is_none());
        assert_eq!(outcome.mle.len(), cfg.mle_pretrain_epochs);
        let mut plain = model(&vocab, 1);
        train_mle(&mut plain, &split, &cfg.mle_config()).unwrap();
        for ((_, a), (_, b)) in adversarial.ps().iter().zip(plain.ps().iter()) {
            assert_eq!(a.value.data(), b.value.data(), "{} diverged", a.name);
        }
    }

    #[test]
    fn rounds_run_and_checkpoint_hook_fires() {
        let (vocab, split) = small_corpus();
        let cfg = small_gan();
        let mut lm = model(&vocab, 2);
        let mut hook_rounds = Vec::new();
        let outcome = seqgan_train_with(&mut lm, &split, &cfg, |round, gen, log| {
            hook_rounds.push(round);
            assert_eq!(log.round, round);
            assert!(gen.ps().grads_all_finite());
            Ok(())
        })
        .unwrap();
        assert_eq!(hook_rounds, vec![1, 2]);
        assert_eq!(outcome.rounds.len(), 2);
        let initial = outcome.initial_disc_accuracy.unwrap();
        assert!((0.0..=1.0).contains(&initial));
        for r in &outcome.rounds {
            assert!(r.mean_reward.is_finite());
            assert!((0.0..=1.0).contains(&r.mean_reward));
            let acc = r.disc_accuracy.unwrap();
            assert!((0.0..=1.0).contains(&acc));
        }
        for (_, p) in lm.ps().iter() {
            assert!(p.value.data().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn adversarial_training_is_deterministic() {
        let (vocab, split) = small_corpus();
        let cfg = small_gan();
        let mut a = model(&vocab, 3);
        let out_a = seqgan_train(&mut a, &split, &cfg).unwrap();
        let mut b = model(&vocab, 3);
        let out_b = seqgan_train(&mut b, &split, &cfg).unwrap();
        for (x, y) in out_a.rounds.iter().zip(&out_b.rounds) {
            assert_eq!(x.mean_reward.to_bits(), y.mean_reward.to_bits());
            assert_eq!(x.baseline.to_bits(), y.baseline.to_bits());
            assert_eq!(x.disc_accuracy, y.disc_accuracy);
        }
        for ((_, x), (_, y)) in a.ps().iter().zip(b.ps().iter()) {
            assert_eq!(x.value.data(), y.value.data(), "{} diverged", x.name);
        }
    }

    #[test]
    fn zero_multiplier_is_plain_mle() {
        let (vocab, split) = small_corpus();
        let cfg_t = TrainConfig {
            total_epochs: 2,
            decay_start_epoch: 2,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let gan = GanConfig {
            sample_multiplier: 0,
            ..small_gan()
        };
        let mut via_pipeline = model(&vocab, 4);
        let outcome = same_source_pretrain(
            &mut via_pipeline,
            ModelKind::Dual,
            &split,
            &gan,
            &cfg_t,
            &cfg_t,
        )
        .unwrap();
        assert!(outcome.gan.is_none());
        assert!(outcome.samples.is_none());
        assert!(outcome.phased.pretrain.is_empty());
        let mut plain = model(&vocab, 4);
        train_mle(&mut plain, &split, &cfg_t).unwrap();
        for ((_, a), (_, b)) in via_pipeline.ps().iter().zip(plain.ps().iter()) {
            assert_eq!(a.value.data(), b.value.data());
        }
    }

    #[test]
    fn same_source_samples_the_documented_volume() {
        let (vocab, split) = small_corpus();
        let cfg_t = TrainConfig {
            total_epochs: 1,
            decay_start_epoch: 1,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        // Naive variant: no adversarial rounds, the generator is pure MLE.
        let gan = GanConfig {
            n_rounds: 0,
            sample_multiplier: 2,
            ..small_gan()
        };
        let mut lm = model(&vocab, 6);
        let outcome =
            same_source_pretrain(&mut lm, ModelKind::Rnn, &split, &gan, &cfg_t, &cfg_t).unwrap();
        let n_tokens: usize = split.train.iter().map(|u| u.tokens.len()).sum();
        let want = gan.sample_multiplier * n_tokens / gan.sample_len;
        let samples = outcome.samples.unwrap();
        assert_eq!(samples.sequences.len(), want);
        assert!(want > 0);
        assert!(outcome.gan.unwrap().rounds.is_empty());
        assert_eq!(outcome.phased.pretrain.len(), 1);
        assert_eq!(outcome.phased.finetune.len(), 1);
    }
}
