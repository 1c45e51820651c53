//! Command-line frontend: corpus preparation, synthetic data, training,
//! evaluation, sampling, and corpus analysis over one experiment directory.

mod analyze;
mod config;
mod eval;
mod exp;
mod prep;
mod report;
mod sample;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cslm_core::corpus::CorpusError;
use cslm_core::model::CheckpointError;
use cslm_core::training::TrainError;

/// What went wrong, bucketed into the exit codes callers script against:
/// 2 for configuration problems, 3 for broken or missing data, 4 for a
/// numerical abort mid-training.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Numeric(m) => write!(f, "numerical abort: {m}"),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Failure {
        match e {
            // Out-of-range knobs are the caller's flags, not the data.
            CorpusError::BadParameter(_) => Failure::Config(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Failure {
        match e {
            TrainError::BadConfig(_) => Failure::Config(e.to_string()),
            TrainError::NonFinite(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Failure {
        Failure::Data(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "cslm",
    about = "Language modeling for code-switched text",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an experiment directory from a raw corpus: vocabulary,
    /// 80/10/10 splits, and corpus statistics.
    Prep {
        /// Input corpus, UTF-8, one utterance per line.
        #[arg(long)]
        corpus: PathBuf,
        /// Experiment directory to create.
        #[arg(long)]
        exp: PathBuf,
        /// Forms seen fewer times than this map to the language's UNK.
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        /// Seed for the split shuffle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Feature file aligned line-for-line with the corpus; rows are
        /// partitioned with the splits.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Generate a synthetic code-switched corpus.
    Synth {
        /// Output corpus file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of utterances.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Probability of switching language at each token boundary.
        #[arg(long, default_value_t = 0.3)]
        switch_prob: f64,
        /// Mean utterance length in tokens.
        #[arg(long, default_value_t = 8.0)]
        mean_len: f64,
        /// Surface forms per language.
        #[arg(long, default_value_t = 50)]
        vocab_size: usize,
    },
    /// Train a model inside a prepared experiment directory.
    Train {
        #[arg(long)]
        exp: PathBuf,
        /// Key = value configuration file; every key has a default.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one configuration key (repeatable), e.g. --set train.epochs=50.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Score a checkpoint on one split.
    Eval {
        #[arg(long)]
        exp: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["train", "dev", "test"])]
        split: String,
        /// Also break perplexity out by language-transition class.
        #[arg(long)]
        decompose: bool,
        /// Report path; defaults to reports/eval_SPLIT.tsv in the experiment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample utterances from a checkpoint and score their novelty against
    /// the training split.
    Sample {
        #[arg(long)]
        exp: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of utterances to sample.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Tokens per sampled utterance.
        #[arg(long, default_value_t = 20)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample file path; defaults to reports/samples.txt in the experiment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus statistics: token counts, switch rate, n-gram type counts,
    /// and optionally n-gram novelty against a second corpus.
    Analyze {
        #[arg(long)]
        corpus: PathBuf,
        /// Reference corpus for novelty percentages.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Report path; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Prep {
            corpus,
            exp,
            min_count,
            seed,
            features,
        } => prep::cmd_prep(&corpus, &exp, min_count, seed, features.as_deref()),
        Cmd::Synth {
            out,
            seed,
            n,
            switch_prob,
            mean_len,
            vocab_size,
        } => synth::cmd_synth(&out, seed, n, switch_prob, mean_len, vocab_size),
        Cmd::Train { exp, config, set } => train::cmd_train(&exp, config.as_deref(), &set),
        Cmd::Eval {
            exp,
            checkpoint,
            split,
            decompose,
            out,
        } => eval::cmd_eval(&exp, &checkpoint, &split, decompose, out.as_deref()),
        Cmd::Sample {
            exp,
            checkpoint,
            n,
            len,
            seed,
            out,
        } => sample::cmd_sample(&exp, &checkpoint, n, len, seed, out.as_deref()),
        Cmd::Analyze {
            corpus,
            against,
            out,
        } => analyze::cmd_analyze(&corpus, against.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
