//! Flat key=value experiment configuration.
//!
//! One key per line, `#` comments and blank lines skipped, later sources
//! win: defaults, then the config file, then `--set` flags. Every key has
//! a default, unknown keys are rejected, and all problems are reported in
//! one pass rather than first-error-wins.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use cslm_core::model::ModelKind;
use cslm_core::seqgan::GanConfig;
use cslm_core::training::{SsSchedule, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMethod {
    Mle,
    Scheduled,
}

impl TrainMethod {
    fn as_str(&self) -> &'static str {
        match self {
            TrainMethod::Mle => "mle",
            TrainMethod::Scheduled => "scheduled",
        }
    }

    fn parse(s: &str) -> Option<TrainMethod> {
        match s {
            "mle" => Some(TrainMethod::Mle),
            "scheduled" => Some(TrainMethod::Scheduled),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PretrainMode {
    None,
    Monolingual,
    SameSourceNaive,
    SameSourceSeqgan,
}

impl PretrainMode {
    fn as_str(&self) -> &'static str {
        match self {
            PretrainMode::None => "none",
            PretrainMode::Monolingual => "monolingual",
            PretrainMode::SameSourceNaive => "same-source-naive",
            PretrainMode::SameSourceSeqgan => "same-source-seqgan",
        }
    }

    fn parse(s: &str) -> Option<PretrainMode> {
        match s {
            "none" => Some(PretrainMode::None),
            "monolingual" => Some(PretrainMode::Monolingual),
            "same-source-naive" => Some(PretrainMode::SameSourceNaive),
            "same-source-seqgan" => Some(PretrainMode::SameSourceSeqgan),
            _ => None,
        }
    }

    pub fn is_same_source(&self) -> bool {
        matches!(
            self,
            PretrainMode::SameSourceNaive | PretrainMode::SameSourceSeqgan
        )
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Fraction of the train split actually used, for data-starvation runs.
    pub train_fraction: f64,
    pub model_kind: ModelKind,
    pub embed: usize,
    pub hidden: usize,
    /// Feed each token's language bit in as an embedded feature channel.
    pub lang_feature: bool,
    pub lr: f64,
    pub decay_rate: f64,
    pub decay_start: usize,
    pub epochs: usize,
    pub batch: usize,
    pub clip: f64,
    pub method: TrainMethod,
    pub ss_floor: f64,
    pub mode: PretrainMode,
    pub pre_epochs: usize,
    pub corpus0: String,
    pub corpus1: String,
    pub gen_kind: ModelKind,
    pub gan: GanConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tc = TrainConfig::default();
        ExperimentConfig {
            seed: 0,
            train_fraction: 1.0,
            model_kind: ModelKind::Dual,
            embed: 64,
            hidden: 64,
            lang_feature: false,
            lr: tc.initial_lr,
            decay_rate: tc.decay_rate,
            decay_start: tc.decay_start_epoch,
            epochs: tc.total_epochs,
            batch: tc.batch_size,
            clip: tc.grad_clip_norm,
            method: TrainMethod::Mle,
            ss_floor: 0.5,
            mode: PretrainMode::None,
            pre_epochs: 30,
            corpus0: String::new(),
            corpus1: String::new(),
            gen_kind: ModelKind::Rnn,
            gan: GanConfig::default(),
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, String> {
    raw.parse()
        .map_err(|_| format!("{key}: cannot parse {raw:?}"))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, String> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("{key}: want true or false, got {raw:?}")),
    }
}

fn parse_kind(key: &str, raw: &str) -> Result<ModelKind, String> {
    // "rnnlm" is the spelled-out name of the baseline model.
    let canon = if raw == "rnnlm" { "rnn" } else { raw };
    ModelKind::parse(canon).ok_or_else(|| format!("{key}: want dual or rnn, got {raw:?}"))
}

impl ExperimentConfig {
    /// Sets one key from its string form. The key list here is the whole
    /// configuration surface; anything else is an error.
    fn set(&mut self, key: &str, raw: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = parse_as(key, raw)?,
            "data.train_fraction" => self.train_fraction = parse_as(key, raw)?,
            "model.kind" => self.model_kind = parse_kind(key, raw)?,
            "model.embed" => self.embed = parse_as(key, raw)?,
            "model.hidden" => self.hidden = parse_as(key, raw)?,
            "features.lang" => self.lang_feature = parse_bool(key, raw)?,
            "train.lr" => self.lr = parse_as(key, raw)?,
            "train.decay_rate" => self.decay_rate = parse_as(key, raw)?,
            "train.decay_start" => self.decay_start = parse_as(key, raw)?,
            "train.epochs" => self.epochs = parse_as(key, raw)?,
            "train.batch" => self.batch = parse_as(key, raw)?,
            "train.clip" => self.clip = parse_as(key, raw)?,
            "train.method" => {
                self.method = TrainMethod::parse(raw)
                    .ok_or_else(|| format!("{key}: want mle or scheduled, got {raw:?}"))?
            }
            "train.ss_floor" => self.ss_floor = parse_as(key, raw)?,
            "pretrain.mode" => {
                self.mode = PretrainMode::parse(raw).ok_or_else(|| {
                    format!(
                        "{key}: want none, monolingual, same-source-naive or \
                         same-source-seqgan, got {raw:?}"
                    )
                })?
            }
            "pretrain.epochs" => self.pre_epochs = parse_as(key, raw)?,
            "pretrain.corpus0" => self.corpus0 = raw.to_string(),
            "pretrain.corpus1" => self.corpus1 = raw.to_string(),
            "gan.generator" => self.gen_kind = parse_kind(key, raw)?,
            "gan.sample_len" => self.gan.sample_len = parse_as(key, raw)?,
            "gan.n_rollouts" => self.gan.n_rollouts = parse_as(key, raw)?,
            "gan.g_steps" => self.gan.g_steps = parse_as(key, raw)?,
            "gan.d_steps" => self.gan.d_steps = parse_as(key, raw)?,
            "gan.n_rounds" => self.gan.n_rounds = parse_as(key, raw)?,
            "gan.mle_epochs" => self.gan.mle_pretrain_epochs = parse_as(key, raw)?,
            "gan.multiplier" => self.gan.sample_multiplier = parse_as(key, raw)?,
            "gan.g_batch" => self.gan.g_batch = parse_as(key, raw)?,
            "gan.d_batch" => self.gan.d_batch = parse_as(key, raw)?,
            "gan.g_lr" => self.gan.g_lr = parse_as(key, raw)?,
            "gan.d_lr" => self.gan.d_lr = parse_as(key, raw)?,
            "gan.baseline_decay" => self.gan.baseline_decay = parse_as(key, raw)?,
            "gan.d_holdout" => self.gan.d_holdout_frac = parse_as(key, raw)?,
            "gan.d_pretrain_steps" => self.gan.d_pretrain_steps = parse_as(key, raw)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Every key with its current value, in sorted order. Parsing this text
    /// back reproduces the configuration exactly.
    pub fn resolved(&self) -> String {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("seed", self.seed.to_string());
        kv.insert("data.train_fraction", self.train_fraction.to_string());
        kv.insert("model.kind", self.model_kind.as_str().to_string());
        kv.insert("model.embed", self.embed.to_string());
        kv.insert("model.hidden", self.hidden.to_string());
        kv.insert("features.lang", self.lang_feature.to_string());
        kv.insert("train.lr", self.lr.to_string());
        kv.insert("train.decay_rate", self.decay_rate.to_string());
        kv.insert("train.decay_start", self.decay_start.to_string());
        kv.insert("train.epochs", self.epochs.to_string());
        kv.insert("train.batch", self.batch.to_string());
        kv.insert("train.clip", self.clip.to_string());
        kv.insert("train.method", self.method.as_str().to_string());
        kv.insert("train.ss_floor", self.ss_floor.to_string());
        kv.insert("pretrain.mode", self.mode.as_str().to_string());
        kv.insert("pretrain.epochs", self.pre_epochs.to_string());
        kv.insert("pretrain.corpus0", self.corpus0.clone());
        kv.insert("pretrain.corpus1", self.corpus1.clone());
        kv.insert("gan.generator", self.gen_kind.as_str().to_string());
        kv.insert("gan.sample_len", self.gan.sample_len.to_string());
        kv.insert("gan.n_rollouts", self.gan.n_rollouts.to_string());
        kv.insert("gan.g_steps", self.gan.g_steps.to_string());
        kv.insert("gan.d_steps", self.gan.d_steps.to_string());
        kv.insert("gan.n_rounds", self.gan.n_rounds.to_string());
        kv.insert("gan.mle_epochs", self.gan.mle_pretrain_epochs.to_string());
        kv.insert("gan.multiplier", self.gan.sample_multiplier.to_string());
        kv.insert("gan.g_batch", self.gan.g_batch.to_string());
        kv.insert("gan.d_batch", self.gan.d_batch.to_string());
        kv.insert("gan.g_lr", self.gan.g_lr.to_string());
        kv.insert("gan.d_lr", self.gan.d_lr.to_string());
        kv.insert("gan.baseline_decay", self.gan.baseline_decay.to_string());
        kv.insert("gan.d_holdout", self.gan.d_holdout_frac.to_string());
        kv.insert(
            "gan.d_pretrain_steps",
            self.gan.d_pretrain_steps.to_string(),
        );
        let mut out = String::new();
        for (k, v) in kv {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        out
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            initial_lr: self.lr,
            decay_rate: self.decay_rate,
            decay_start_epoch: self.decay_start,
            total_epochs: self.epochs,
            batch_size: self.batch,
            grad_clip_norm: self.clip,
            seed: self.seed,
        }
    }

    /// Pretraining runs a short phase at constant learning rate; only the
    /// epoch count differs from the fine-tune schedule.
    pub fn pretrain_config(&self) -> TrainConfig {
        TrainConfig {
            total_epochs: self.pre_epochs,
            decay_start_epoch: self.pre_epochs,
            ..self.train_config()
        }
    }

    pub fn gan_config(&self) -> GanConfig {
        GanConfig {
            seed: self.seed,
            ..self.gan.clone()
        }
    }

    pub fn ss_schedule(&self) -> SsSchedule {
        SsSchedule {
            floor: self.ss_floor,
        }
    }

    /// Cross-field checks. Range checks on the derived training configs run
    /// only for the parts this mode will actually execute.
    fn validate(&self, errors: &mut Vec<String>) {
        if let Err(e) = self.train_config().validate() {
            errors.push(e.to_string());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            errors.push(format!(
                "data.train_fraction {} outside (0, 1]",
                self.train_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.ss_floor) {
            errors.push(format!("train.ss_floor {} outside [0, 1]", self.ss_floor));
        }
        if self.embed == 0 || self.hidden == 0 {
            errors.push("model.embed and model.hidden must be positive".into());
        }
        if self.method == TrainMethod::Scheduled && self.mode != PretrainMode::None {
            errors.push(
                "train.method = scheduled only applies to plain training (pretrain.mode = none)"
                    .into(),
            );
        }
        if self.mode != PretrainMode::None {
            if self.pre_epochs == 0 {
                errors.push("pretrain.epochs must be positive when pretraining".into());
            } else if let Err(e) = self.pretrain_config().validate() {
                errors.push(e.to_string());
            }
        }
        if self.mode == PretrainMode::Monolingual
            && (self.corpus0.is_empty() || self.corpus1.is_empty())
        {
            errors.push(
                "pretrain.mode = monolingual needs pretrain.corpus0 and pretrain.corpus1".into(),
            );
        }
        if self.mode.is_same_source() {
            if let Err(e) = self.gan_config().validate() {
                errors.push(e.to_string());
            }
        }
    }

    /// Builds the configuration from a file and `--set key=value` overrides.
    /// Returns every problem found, not just the first.
    pub fn load(file: Option<&Path>, sets: &[String]) -> Result<ExperimentConfig, Vec<String>> {
        let mut cfg = ExperimentConfig::default();
        let mut errors = Vec::new();
        if let Some(path) = file {
            match std::fs::read_to_string(path) {
                Ok(text) => {
                    for (i, line) in text.lines().enumerate() {
                        let line = line.trim();
                        if line.is_empty() || line.starts_with('#') {
                            continue;
                        }
                        match line.split_once('=') {
                            Some((k, v)) => {
                                if let Err(e) = cfg.set(k.trim(), v.trim()) {
                                    errors.push(format!("{}:{}: {e}", path.display(), i + 1));
                                }
                            }
                            None => errors.push(format!(
                                "{}:{}: expected key = value",
                                path.display(),
                                i + 1
                            )),
                        }
                    }
                }
                Err(e) => errors.push(format!("cannot read {}: {e}", path.display())),
            }
        }
        for s in sets {
            match s.split_once('=') {
                Some((k, v)) => {
                    if let Err(e) = cfg.set(k.trim(), v.trim()) {
                        errors.push(format!("--set {s}: {e}"));
                    }
                }
                None => errors.push(format!("--set {s}: expected key=value")),
            }
        }
        if errors.is_empty() {
            cfg.validate(&mut errors);
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }
}
