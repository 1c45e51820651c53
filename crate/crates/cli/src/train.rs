//! Training inside an experiment directory: plain MLE or scheduled
//! sampling, with optional monolingual or same-source pretraining.

use std::path::Path;
use std::time::Instant;

use cslm_core::corpus::{derive_lang_features, CorpusSplit, Utterance, Vocabulary};
use cslm_core::model::{save_model, Lm, ModelDims};
use cslm_core::numerics::RngState;
use cslm_core::seqgan::{same_source_pretrain_with, SameSourceOutcome};
use cslm_core::training::{
    decomposed_perplexity, pretrain_then_finetune, train_mle, train_scheduled_sampling, EpochLog,
};

use crate::config::{ExperimentConfig, PretrainMode, TrainMethod};
use crate::eval::{decomposition_rows, EVAL_HEADER};
use crate::exp::{read_corpus_lines, ExperimentDir};
use crate::report::{epoch_rows, round_rows, write_tsv, EPOCH_HEADER, ROUND_HEADER};
use crate::sample::{decode_lines, novelty_rows, NOVELTY_HEADER};
use crate::Failure;

/// Deterministic subset of the train split for data-starvation runs:
/// a seeded shuffle picks which utterances survive, corpus order stays.
fn subsample(mut utts: Vec<Utterance>, fraction: f64, seed: u64) -> Vec<Utterance> {
    if fraction >= 1.0 {
        return utts;
    }
    let keep = ((utts.len() as f64 * fraction).round() as usize).max(1);
    let mut order: Vec<usize> = (0..utts.len()).collect();
    RngState::seeded(seed ^ 0x5AB5_A3B1).shuffle(&mut order);
    let mut chosen: Vec<usize> = order.into_iter().take(keep).collect();
    chosen.sort_unstable();
    let mut by_index: Vec<Option<Utterance>> = utts.drain(..).map(Some).collect();
    chosen
        .into_iter()
        .map(|i| by_index[i].take().expect("indices are distinct"))
        .collect()
}

/// Reads a monolingual pretraining corpus and encodes it with the
/// experiment vocabulary; unknown forms become UNKs.
fn load_pretrain_corpus(
    path: &str,
    vocab: &Vocabulary,
    lang_feature: bool,
) -> Result<Vec<Utterance>, Failure> {
    let lines = read_corpus_lines(Path::new(path))
        .map_err(|e| Failure::Data(format!("{path}: {e}")))?;
    let mut utts: Vec<Utterance> = lines.iter().map(|(_, t)| vocab.encode(t)).collect();
    if lang_feature {
        derive_lang_features(&utts).attach(&mut utts);
    }
    Ok(utts)
}

fn write_epoch_log(exp: &ExperimentDir, name: &str, logs: &[EpochLog]) -> Result<(), Failure> {
    write_tsv(&exp.log_path(name), EPOCH_HEADER, &epoch_rows(logs))?;
    Ok(())
}

fn write_same_source_reports(
    exp: &ExperimentDir,
    vocab: &Vocabulary,
    train: &[Utterance],
    outcome: &SameSourceOutcome,
    sample_len: usize,
) -> Result<(), Failure> {
    if let Some(gan) = &outcome.gan {
        write_epoch_log(exp, "generator.tsv", &gan.mle)?;
        if !gan.rounds.is_empty() {
            write_tsv(&exp.log_path("gan.tsv"), ROUND_HEADER, &round_rows(&gan.rounds))?;
        }
    }
    if let Some(samples) = &outcome.samples {
        let path = exp.report_path("pretrain_samples.txt");
        std::fs::write(&path, decode_lines(vocab, &samples.sequences))?;
        let meta = format!(
            "generator {}\nseed {}\nlen {}\nn {}\n",
            samples.generator_id,
            samples.seed,
            sample_len,
            samples.sequences.len()
        );
        std::fs::write(exp.report_path("pretrain_samples.txt.meta"), meta)?;
        write_tsv(
            &exp.report_path("pretrain_novelty.tsv"),
            NOVELTY_HEADER,
            &novelty_rows(&samples.sequences, train)?,
        )?;
    }
    Ok(())
}

pub fn cmd_train(
    exp_root: &Path,
    config_file: Option<&Path>,
    sets: &[String],
) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(config_file, sets).map_err(|errors| {
        Failure::Config(format!(
            "{} problem(s):\n  {}",
            errors.len(),
            errors.join("\n  ")
        ))
    })?;
    let exp = ExperimentDir::new(exp_root);
    let (vocab, digest) = exp.vocab()?;
    std::fs::write(exp.config_path(), cfg.resolved())?;

    let (full_train, decls) = exp.load_split("train", &vocab, cfg.lang_feature)?;
    let (dev, dev_decls) = exp.load_split("dev", &vocab, cfg.lang_feature)?;
    if decls != dev_decls {
        return Err(Failure::Data(format!(
            "train and dev declare different feature channels ({decls:?} vs {dev_decls:?})"
        )));
    }
    let n_full = full_train.len();
    let train = subsample(full_train, cfg.train_fraction, cfg.seed);
    if train.len() < n_full {
        eprintln!("train split cut to {} of {n_full} utterances", train.len());
    }
    let split = CorpusSplit {
        train,
        dev,
        test: Vec::new(),
        seed: cfg.seed,
    };

    let mut rng = RngState::seeded(cfg.seed);
    let mut lm = Lm::new(
        cfg.model_kind,
        vocab.layout(),
        ModelDims {
            embed: cfg.embed,
            hidden: cfg.hidden,
        },
        &decls,
        &mut rng,
    );

    let started = Instant::now();
    match cfg.mode {
        PretrainMode::None => {
            let logs = match cfg.method {
                TrainMethod::Mle => train_mle(&mut lm, &split, &cfg.train_config())?,
                TrainMethod::Scheduled => train_scheduled_sampling(
                    &mut lm,
                    &split,
                    &cfg.train_config(),
                    &cfg.ss_schedule(),
                )?,
            };
            write_epoch_log(&exp, "train.tsv", &logs)?;
        }
        PretrainMode::Monolingual => {
            let mut pre = load_pretrain_corpus(&cfg.corpus0, &vocab, cfg.lang_feature)?;
            pre.extend(load_pretrain_corpus(&cfg.corpus1, &vocab, cfg.lang_feature)?);
            let phased = pretrain_then_finetune(
                &mut lm,
                &pre,
                &split,
                &cfg.pretrain_config(),
                &cfg.train_config(),
            )?;
            write_epoch_log(&exp, "pretrain.tsv", &phased.pretrain)?;
            write_epoch_log(&exp, "train.tsv", &phased.finetune)?;
        }
        PretrainMode::SameSourceNaive | PretrainMode::SameSourceSeqgan => {
            let mut gan = cfg.gan_config();
            if cfg.mode == PretrainMode::SameSourceNaive {
                // The naive variant trains the generator by MLE alone.
                gan.n_rounds = 0;
            }
            let round_dir = exp.checkpoint_path("gan");
            std::fs::create_dir_all(&round_dir)?;
            let outcome = same_source_pretrain_with(
                &mut lm,
                cfg.gen_kind,
                &split,
                &gan,
                &cfg.pretrain_config(),
                &cfg.train_config(),
                |round, gen, log| {
                    let path = round_dir.join(format!("round_{round:02}.ckpt"));
                    save_model(&path, gen, &digest)
                        .map_err(|e| cslm_core::training::TrainError::BadConfig(e.to_string()))?;
                    eprintln!(
                        "gan round {round}: reward {:.4} baseline {:.4} ({:.1}s)",
                        log.mean_reward, log.baseline, log.seconds
                    );
                    Ok(())
                },
            )?;
            write_same_source_reports(&exp, &vocab, &split.train, &outcome, gan.sample_len)?;
            write_epoch_log(&exp, "pretrain.tsv", &outcome.phased.pretrain)?;
            write_epoch_log(&exp, "train.tsv", &outcome.phased.finetune)?;
        }
    }
    eprintln!("training finished in {:.1}s", started.elapsed().as_secs_f64());

    save_model(&exp.checkpoint_path("best.ckpt"), &lm, &digest)?;
    let dec = decomposed_perplexity(&lm, &split.dev)?;
    write_tsv(
        &exp.report_path("eval_dev.tsv"),
        EVAL_HEADER,
        &decomposition_rows(&dec, true),
    )?;
    eprintln!("best dev perplexity {}", dec.overall());
    Ok(())
}
