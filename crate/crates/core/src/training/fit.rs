//! Teacher-forced training, scheduled sampling, and the two-phase
//! pretrain/fine-tune pipeline.

use std::time::Instant;

use crate::corpus::{CorpusSplit, FeatureVector, Lang, Utterance, BOS};
use crate::model::{sequence_nll, Lm};
use crate::numerics::{
    mask_renormalize, sample_categorical, softmax, Exec, NodeId, RngState, Tape,
};

use super::config::{lr_at_epoch, SsSchedule, TrainConfig};
use super::eval::perplexity;
use super::sgd::sgd_step;
use super::TrainError;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean NLL per predicted position over the epoch's realized inputs.
    pub train_loss: f64,
    pub dev_ppl: f64,
    pub seconds: f64,
}

impl EpochLog {
    pub const TSV_HEADER: &'static str = "epoch\tlr\ttrain_loss\tdev_ppl\tseconds";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.3}",
            self.epoch, self.lr, self.train_loss, self.dev_ppl, self.seconds
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct PhasedLogs {
    pub pretrain: Vec<EpochLog>,
    pub finetune: Vec<EpochLog>,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Teacher-forced MLE. Shuffles the train set afresh each epoch (seeded
/// from config.seed and the epoch index), evaluates dev perplexity after
/// every epoch, and finishes holding the best-dev parameters.
pub fn train_mle(
    lm: &mut Lm,
    split: &CorpusSplit,
    cfg: &TrainConfig,
) -> Result<Vec<EpochLog>, TrainError> {
    train_loop(lm, split, cfg, None)
}

/// Scheduled sampling: like MLE, but each non-initial input token is, with
/// probability 1 − p_teacher(epoch), replaced by a draw from the model's
/// own previous-step distribution. With floor = 1.0 this reproduces
/// `train_mle` bit for bit.
pub fn train_scheduled_sampling(
    lm: &mut Lm,
    split: &CorpusSplit,
    cfg: &TrainConfig,
    schedule: &SsSchedule,
) -> Result<Vec<EpochLog>, TrainError> {
    train_loop(lm, split, cfg, Some(schedule))
}

fn train_loop(
    lm: &mut Lm,
    split: &CorpusSplit,
    cfg: &TrainConfig,
    ss: Option<&SsSchedule>,
) -> Result<Vec<EpochLog>, TrainError> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if split.dev.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    // Replacement draws get their own stream, so the schedule cannot
    // perturb shuffling and a degenerate schedule matches plain MLE.
    let mut ss_rng = RngState::seeded(cfg.seed ^ 0x7363_6865_6475_6c65);
    let mut logs = Vec::with_capacity(cfg.total_epochs);
    let mut best: Option<(f64, crate::numerics::ParamSet)> = None;
    for e in 1..=cfg.total_epochs {
        let t0 = Instant::now();
        let lr = lr_at_epoch(cfg, e);
        let p_teacher = ss.map_or(1.0, |s| s.p_teacher(e, cfg.total_epochs));
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        RngState::seeded(epoch_seed(cfg.seed, e)).shuffle(&mut order);
        let mut nll_sum = 0.0;
        let mut nll_n = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let mut nodes = Vec::with_capacity(batch.len());
            for &i in batch {
                let u = &split.train[i];
                let (node, n) = match ss {
                    None => sequence_nll(lm, &mut tape, u),
                    Some(_) => sequence_nll_sampled(lm, &mut tape, u, p_teacher, &mut ss_rng),
                };
                nll_sum += tape.value(node).item();
                nll_n += n;
                nodes.push(node);
            }
            let mut acc = nodes[0];
            for v in &nodes[1..] {
                acc = tape.add(acc, *v);
            }
            // Sum over time, mean over the batch.
            let loss = tape.scale(acc, 1.0 / batch.len() as f64);
            if !tape.value(loss).item().is_finite() {
                return Err(TrainError::NonFinite(format!("loss at epoch {e}")));
            }
            tape.backward(loss, lm.ps_mut());
            sgd_step(lm.ps_mut(), lr, cfg.grad_clip_norm)?;
        }
        let dev_ppl = perplexity(lm, &split.dev)?;
        if best.as_ref().is_none_or(|(b, _)| dev_ppl < *b) {
            best = Some((dev_ppl, lm.ps().clone()));
        }
        logs.push(EpochLog {
            epoch: e,
            lr,
            train_loss: nll_sum / nll_n as f64,
            dev_ppl,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    if let Some((_, ps)) = best {
        *lm.ps_mut() = ps;
    }
    Ok(logs)
}

/// One utterance's NLL with scheduled-sampling inputs. Mirrors
/// `model::sequence_nlls` op for op; only the choice of input token at each
/// non-initial step differs. Targets are always the gold tokens. Replaced
/// inputs carry no feature vector, and EOS is renormalized out of the draw
/// because an end marker cannot be consumed as input.
fn sequence_nll_sampled(
    lm: &Lm,
    tape: &mut Tape,
    u: &Utterance,
    p_teacher: f64,
    rng: &mut RngState,
) -> (NodeId, usize) {
    assert!(!u.tokens.is_empty(), "cannot score an empty utterance");
    let layout = lm.layout();
    let mut state = lm.zero_state(tape);
    let mut prev_logits: Option<NodeId> = None;
    let mut nlls = Vec::with_capacity(u.tokens.len() + 1);
    for i in 0..=u.tokens.len() {
        let (selector, index, feats): (Lang, usize, Option<&FeatureVector>) = if i == 0 {
            (u.tokens[0].lang, BOS, None)
        } else {
            let gold = &u.tokens[i - 1];
            if rng.bernoulli(p_teacher) {
                (
                    gold.lang,
                    gold.index,
                    u.features.as_ref().map(|f| &f[i - 1]),
                )
            } else {
                let logits = tape.value(prev_logits.expect("step > 0 has previous logits"));
                let probs = softmax(logits.data());
                let eos = probs.len() - 1;
                let probs =
                    mask_renormalize(&probs, &[eos]).expect("non-EOS mass remains");
                let s = sample_categorical(&probs, rng).expect("renormalized distribution");
                let g = layout.from_scorable(s);
                let lang = layout
                    .lang_of(g)
                    .expect("scorable tokens carry a language");
                (lang, g, None)
            }
        };
        let (next, logits) = lm.step(tape, selector, index, feats, &state);
        state = next;
        let target = if i < u.tokens.len() {
            layout
                .to_scorable(u.tokens[i].index)
                .expect("prediction targets must be scorable")
        } else {
            layout.scorable_count() - 1
        };
        nlls.push(tape.nll(logits, target));
        prev_logits = Some(logits);
    }
    let n = nlls.len();
    let mut acc = nlls[0];
    for v in &nlls[1..] {
        acc = tape.add(acc, *v);
    }
    (acc, n)
}

/// Two TrainConfig-driven phases over one model: MLE on `pretrain`, then
/// MLE on the real split, starting from the pretrained parameters. Dev
/// perplexity for both phases is measured on the real dev set. An empty
/// pretrain corpus degenerates to plain `train_mle`.
pub fn pretrain_then_finetune(
    lm: &mut Lm,
    pretrain: &[Utterance],
    split: &CorpusSplit,
    cfg_pre: &TrainConfig,
    cfg_fine: &TrainConfig,
) -> Result<PhasedLogs, TrainError> {
    let pretrain_logs = if pretrain.is_empty() {
        Vec::new()
    } else {
        let total = lm.layout().total();
        for u in pretrain {
            for t in &u.tokens {
                if t.index >= total {
                    return Err(TrainError::VocabMismatch(format!(
                        "pretrain token index {} outside vocabulary of {total}",
                        t.index
                    )));
                }
            }
        }
        let pre_split = CorpusSplit {
            train: pretrain.to_vec(),
            dev: split.dev.clone(),
            test: Vec::new(),
            seed: cfg_pre.seed,
        };
        train_loop(lm, &pre_split, cfg_pre, None)?
    };
    let finetune = train_loop(lm, split, cfg_fine, None)?;
    Ok(PhasedLogs {
        pretrain: pretrain_logs,
        finetune,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, SurfaceToken};
    use crate::model::{ModelDims, ModelKind};
    use crate::training::eval::ppl_from;

    // Ten utterances, each identified by its first token and deterministic
    // afterwards, so a big-enough model can memorize everything except the
    // uniform-over-10 first position.
    fn memorizable_split() -> (crate::corpus::Vocabulary, CorpusSplit) {
        let l0: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let l1: Vec<char> = (0..10)
            .map(|i| char::from_u32(0x4E00 + i).unwrap())
            .collect();
        let mut lines = Vec::new();
        for i in 0..10usize {
            let mut toks = Vec::new();
            for j in 0..8usize {
                let k = (i + j) % 10;
                toks.push(l0[k].clone());
                toks.push(l1[k].to_string());
            }
            lines.push(toks.join(" "));
        }
        let surf: Vec<Vec<SurfaceToken>> = lines
            .iter()
            .map(|l| crate::corpus::tokenize_utterance(l).unwrap())
            .collect();
        let vocab = build_vocabulary(&surf, 1).unwrap();
        let utts: Vec<Utterance> = surf.iter().map(|s| vocab.encode(s)).collect();
        let split = CorpusSplit {
            train: utts.clone(),
            dev: utts,
            test: Vec::new(),
            seed: 0,
        };
        (vocab, split)
    }

    fn small_model(vocab: &crate::corpus::Vocabulary, hidden: usize, seed: u64) -> Lm {
        let mut rng = RngState::seeded(seed);
        Lm::new(
            ModelKind::Dual,
            vocab.layout(),
            ModelDims {
                embed: hidden,
                hidden,
            },
            &[],
            &mut rng,
        )
    }

    #[test]
    fn overfits_a_tiny_corpus() {
        let (vocab, split) = memorizable_split();
        let mut lm = small_model(&vocab, 16, 1);
        let cfg = TrainConfig {
            total_epochs: 200,
            decay_start_epoch: 80,
            batch_size: 2,
            seed: 7,
            ..TrainConfig::default()
        };
        let logs = train_mle(&mut lm, &split, &cfg).unwrap();
        assert_eq!(logs.len(), 200);
        // Train-set perplexity of the final model: the first position is
        // irreducibly uniform over 10 starts, every later position is
        // memorizable, so the floor is exp(ln(10)/17) ≈ 1.145.
        let train_ppl = perplexity(&lm, &split.train).unwrap();
        assert!(train_ppl < 1.5, "train perplexity {train_ppl}");
        // Individual epochs bounce while the step is still large, but the
        // decay phase as a whole must make net progress.
        let at_decay = logs[cfg.decay_start_epoch - 1].train_loss;
        let last = logs.last().unwrap().train_loss;
        assert!(
            last < at_decay,
            "no net progress under decay: {at_decay} -> {last}"
        );
        // Best-dev selection cannot be worse than the first epoch.
        let best = logs
            .iter()
            .map(|l| l.dev_ppl)
            .fold(f64::INFINITY, f64::min);
        assert!(best <= logs[0].dev_ppl);
        let held = perplexity(&lm, &split.dev).unwrap();
        assert!((held - best).abs() < 1e-9, "held {held} best {best}");
    }

    #[test]
    fn same_seed_reproduces_run_exactly() {
        let (vocab, split) = memorizable_split();
        let cfg = TrainConfig {
            total_epochs: 3,
            decay_start_epoch: 1,
            batch_size: 4,
            seed: 11,
            ..TrainConfig::default()
        };
        let mut a = small_model(&vocab, 6, 2);
        let logs_a = train_mle(&mut a, &split, &cfg).unwrap();
        let mut b = small_model(&vocab, 6, 2);
        let logs_b = train_mle(&mut b, &split, &cfg).unwrap();
        for (x, y) in logs_a.iter().zip(&logs_b) {
            assert_eq!(x.epoch, y.epoch);
            assert_eq!(x.lr.to_bits(), y.lr.to_bits());
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.dev_ppl.to_bits(), y.dev_ppl.to_bits());
        }
        for ((_, pa), (_, pb)) in a.ps().iter().zip(b.ps().iter()) {
            assert_eq!(pa.value.data(), pb.value.data());
        }
    }

    #[test]
    fn degenerate_schedule_is_plain_mle() {
        let (vocab, split) = memorizable_split();
        let cfg = TrainConfig {
            total_epochs: 3,
            decay_start_epoch: 3,
            batch_size: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let mut mle = small_model(&vocab, 6, 9);
        let logs_mle = train_mle(&mut mle, &split, &cfg).unwrap();
        let mut ss = small_model(&vocab, 6, 9);
        let logs_ss =
            train_scheduled_sampling(&mut ss, &split, &cfg, &SsSchedule { floor: 1.0 }).unwrap();
        for ((_, pa), (_, pb)) in mle.ps().iter().zip(ss.ps().iter()) {
            assert_eq!(pa.value.data(), pb.value.data(), "{} diverged", pa.name);
        }
        for (x, y) in logs_mle.iter().zip(&logs_ss) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.dev_ppl.to_bits(), y.dev_ppl.to_bits());
        }
    }

    #[test]
    fn sampled_inputs_change_training_but_stay_finite() {
        let (vocab, split) = memorizable_split();
        let cfg = TrainConfig {
            total_epochs: 4,
            decay_start_epoch: 4,
            batch_size: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let mut mle = small_model(&vocab, 6, 9);
        train_mle(&mut mle, &split, &cfg).unwrap();
        let mut ss = small_model(&vocab, 6, 9);
        let logs =
            train_scheduled_sampling(&mut ss, &split, &cfg, &SsSchedule { floor: 0.0 }).unwrap();
        assert!(logs.iter().all(|l| l.train_loss.is_finite()));
        let same = mle
            .ps()
            .iter()
            .zip(ss.ps().iter())
            .all(|((_, a), (_, b))| a.value.data() == b.value.data());
        assert!(!same, "sampling at floor 0 must alter the trajectory");
    }

    #[test]
    fn empty_pretrain_equals_plain_mle() {
        let (vocab, split) = memorizable_split();
        let cfg = TrainConfig {
            total_epochs: 2,
            decay_start_epoch: 2,
            batch_size: 4,
            seed: 3,
            ..TrainConfig::default()
        };
        let mut plain = small_model(&vocab, 6, 4);
        train_mle(&mut plain, &split, &cfg).unwrap();
        let mut phased = small_model(&vocab, 6, 4);
        let logs = pretrain_then_finetune(&mut phased, &[], &split, &cfg, &cfg).unwrap();
        assert!(logs.pretrain.is_empty());
        assert_eq!(logs.finetune.len(), 2);
        for ((_, pa), (_, pb)) in plain.ps().iter().zip(phased.ps().iter()) {
            assert_eq!(pa.value.data(), pb.value.data());
        }
    }

    #[test]
    fn phases_are_logged_separately() {
        let (vocab, split) = memorizable_split();
        let cfg_pre = TrainConfig {
            total_epochs: 3,
            decay_start_epoch: 3,
            batch_size: 4,
            seed: 3,
            ..TrainConfig::default()
        };
        let cfg_fine = TrainConfig {
            total_epochs: 2,
            decay_start_epoch: 2,
            batch_size: 4,
            seed: 4,
            ..TrainConfig::default()
        };
        let pre_corpus = split.train[..5].to_vec();
        let mut lm = small_model(&vocab, 6, 4);
        let logs =
            pretrain_then_finetune(&mut lm, &pre_corpus, &split, &cfg_pre, &cfg_fine).unwrap();
        assert_eq!(logs.pretrain.len(), 3);
        assert_eq!(logs.finetune.len(), 2);
    }

    #[test]
    fn pretrain_tokens_must_fit_the_vocabulary() {
        let (vocab, split) = memorizable_split();
        let mut lm = small_model(&vocab, 6, 4);
        let bad = Utterance {
            tokens: vec![crate::corpus::Token {
                lang: Lang::L0,
                index: vocab.total() + 3,
            }],
            features: None,
        };
        let cfg = TrainConfig {
            total_epochs: 1,
            decay_start_epoch: 1,
            ..TrainConfig::default()
        };
        let err = pretrain_then_finetune(&mut lm, &[bad], &split, &cfg, &cfg).unwrap_err();
        assert!(matches!(err, TrainError::VocabMismatch(_)));
    }

    #[test]
    fn epoch_log_serializes_to_tsv() {
        let log = EpochLog {
            epoch: 3,
            lr: 0.98,
            train_loss: 1.25,
            dev_ppl: 44.5,
            seconds: 1.2345,
        };
        assert_eq!(log.tsv_row(), "3\t0.98\t1.25\t44.5\t1.234");
        assert_eq!(EpochLog::TSV_HEADER.split('\t').count(), 5);
    }

    #[test]
    fn perplexity_formula_sanity() {
        assert!((ppl_from((4.0f64).ln() * 6.0, 6) - 4.0).abs() < 1e-12);
    }
}
