//! Deterministic 80/10/10 corpus splitting and per-split statistics.

use crate::numerics::RngState;

use super::token::Lang;
use super::vocab::Utterance;
use super::CorpusError;

#[derive(Clone, Debug)]
pub struct CorpusSplit {
    pub train: Vec<Utterance>,
    pub dev: Vec<Utterance>,
    pub test: Vec<Utterance>,
    pub seed: u64,
}

/// The permutation and cut sizes behind `split_corpus`: shuffled index
/// order, train count, dev count. Depends only on the corpus size and the
/// seed, so parallel data (raw lines, feature rows) can be partitioned
/// identically.
pub fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, usize, usize), CorpusError> {
    if n < 10 {
        return Err(CorpusError::TooSmall { n, need: 10 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngState::seeded(seed);
    rng.shuffle(&mut order);
    Ok((order, (8 * n + 5) / 10, (n + 5) / 10))
}

/// Shuffles with the seed and cuts 80/10/10, each boundary rounded to the
/// nearest utterance. Partition sizes are exact for multiples of ten and
/// within one utterance otherwise.
pub fn split_corpus(utterances: Vec<Utterance>, seed: u64) -> Result<CorpusSplit, CorpusError> {
    let n = utterances.len();
    let (order, n_train, n_dev) = split_indices(n, seed)?;
    let mut shuffled: Vec<Utterance> = Vec::with_capacity(n);
    let mut by_index: Vec<Option<Utterance>> = utterances.into_iter().map(Some).collect();
    for i in order {
        shuffled.push(by_index[i].take().expect("permutation visits once"));
    }
    let test = shuffled.split_off(n_train + n_dev);
    let dev = shuffled.split_off(n_train);
    Ok(CorpusSplit {
        train: shuffled,
        dev,
        test,
        seed,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SplitStats {
    pub utterances: usize,
    pub tokens: usize,
    pub l0_tokens: usize,
    pub l1_tokens: usize,
}

pub fn stats_of(utterances: &[Utterance]) -> SplitStats {
    let mut s = SplitStats {
        utterances: utterances.len(),
        ..SplitStats::default()
    };
    for u in utterances {
        for t in &u.tokens {
            s.tokens += 1;
            match t.lang {
                Lang::L0 => s.l0_tokens += 1,
                Lang::L1 => s.l1_tokens += 1,
            }
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub train: SplitStats,
    pub dev: SplitStats,
    pub test: SplitStats,
}

/// Token counts per split. BOS/EOS framing is added later by the training
/// loop, so these counts cover real tokens only.
pub fn corpus_stats(split: &CorpusSplit) -> CorpusStats {
    CorpusStats {
        train: stats_of(&split.train),
        dev: stats_of(&split.dev),
        test: stats_of(&split.test),
    }
}
