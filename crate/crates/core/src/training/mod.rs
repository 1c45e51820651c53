//! Optimization loops and held-out evaluation.

mod config;
mod eval;
mod fit;
mod sgd;

pub use config::{lr_at_epoch, SsSchedule, TrainConfig};
pub use eval::{
    decomposed_perplexity, perplexity, ppl_from, ClassStat, Decomposition, TransitionClass,
    EVAL_CHUNK,
};
pub use fit::{
    pretrain_then_finetune, train_mle, train_scheduled_sampling, EpochLog, PhasedLogs,
};
pub use sgd::sgd_step;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("evaluation set is empty")]
    EmptyEval,
    #[error("training set is empty")]
    EmptyTrain,
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("corpus does not match vocabulary: {0}")]
    VocabMismatch(String),
    #[error("discriminator needs non-empty real and fake sets")]
    SingleClass,
    #[error("generated set contains no {0}-grams")]
    NoNgrams(usize),
}
