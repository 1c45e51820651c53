//! Two-language vocabulary with reserved specials and a fixed index layout.
//!
//! Global indices:
//!
//! ```text
//! 0             BOS          (language-neutral)
//! 1             EOS          (language-neutral)
//! 2             DUMMY0       ┐
//! 3             UNK0         │ L0 range, n0 = 2 + |tokens0| indices
//! 4 ..          tokens0      ┘
//! 2+n0          DUMMY1       ┐
//! 3+n0          UNK1         │ L1 range, n1 = 2 + |tokens1| indices
//! 4+n0 ..       tokens1      ┘
//! ```
//!
//! The "scorable" view is the output space of the models: every real token
//! plus UNKs plus EOS, with both dummies excluded (they are model-internal
//! inputs and must never receive probability mass). EOS sits last.

use std::collections::HashMap;
use std::path::Path;

use super::features::FeatureVector;
use super::token::{Lang, SurfaceToken};
use super::CorpusError;

pub const BOS: usize = 0;
pub const EOS: usize = 1;

pub const BOS_TEXT: &str = "<bos>";
pub const EOS_TEXT: &str = "<eos>";
pub const DUMMY0_TEXT: &str = "<dummy0>";
pub const DUMMY1_TEXT: &str = "<dummy1>";
pub const UNK0_TEXT: &str = "<unk0>";
pub const UNK1_TEXT: &str = "<unk1>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub lang: Lang,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Utterance {
    pub tokens: Vec<Token>,
    pub features: Option<Vec<FeatureVector>>,
}

impl Utterance {
    pub fn new(tokens: Vec<Token>) -> Self {
        Utterance {
            tokens,
            features: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// The pure index arithmetic of a vocabulary: everything derivable from the
/// two range sizes. Models carry this instead of the string tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n0: usize,
    pub n1: usize,
}

impl Layout {
    pub fn lang_count(&self, lang: Lang) -> usize {
        match lang {
            Lang::L0 => self.n0,
            Lang::L1 => self.n1,
        }
    }

    /// Total number of global indices, BOS and EOS included.
    pub fn total(&self) -> usize {
        2 + self.n0 + self.n1
    }

    pub fn bos(&self) -> usize {
        BOS
    }

    pub fn eos(&self) -> usize {
        EOS
    }

    pub fn dummy(&self, lang: Lang) -> usize {
        match lang {
            Lang::L0 => 2,
            Lang::L1 => 2 + self.n0,
        }
    }

    pub fn unk(&self, lang: Lang) -> usize {
        self.dummy(lang) + 1
    }

    /// Language of a global index; BOS and EOS have none.
    pub fn lang_of(&self, index: usize) -> Option<Lang> {
        if index < 2 {
            None
        } else if index < 2 + self.n0 {
            Some(Lang::L0)
        } else if index < self.total() {
            Some(Lang::L1)
        } else {
            panic!("index {index} out of range for vocabulary of {}", self.total())
        }
    }

    /// Number of indices the models assign probability to.
    pub fn scorable_count(&self) -> usize {
        // UNK + real tokens per language, plus EOS.
        (self.n0 - 1) + (self.n1 - 1) + 1
    }

    /// Maps a global index into the scorable range; dummies and BOS map to
    /// nothing.
    pub fn to_scorable(&self, index: usize) -> Option<usize> {
        let n0 = self.n0;
        if index == EOS {
            Some(self.scorable_count() - 1)
        } else if index == BOS || index == self.dummy(Lang::L0) || index == self.dummy(Lang::L1) {
            None
        } else if index < 2 + n0 {
            Some(index - 3)
        } else if index < self.total() {
            Some((n0 - 1) + (index - (3 + n0)))
        } else {
            panic!("index {index} out of range")
        }
    }

    pub fn from_scorable(&self, s: usize) -> usize {
        let n0 = self.n0;
        let n_l0 = n0 - 1;
        let n_l1 = self.n1 - 1;
        if s < n_l0 {
            3 + s
        } else if s < n_l0 + n_l1 {
            3 + n0 + (s - n_l0)
        } else if s == n_l0 + n_l1 {
            EOS
        } else {
            panic!("scorable index {s} out of range for {}", self.scorable_count())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens0: Vec<String>,
    tokens1: Vec<String>,
    map0: HashMap<String, usize>,
    map1: HashMap<String, usize>,
    pub min_count: usize,
}

impl Vocabulary {
    fn from_token_lists(tokens0: Vec<String>, tokens1: Vec<String>, min_count: usize) -> Self {
        let mut v = Vocabulary {
            tokens0,
            tokens1,
            map0: HashMap::new(),
            map1: HashMap::new(),
            min_count,
        };
        for (i, t) in v.tokens0.iter().enumerate() {
            v.map0.insert(t.clone(), 4 + i);
        }
        let base1 = 4 + v.n0();
        for (i, t) in v.tokens1.iter().enumerate() {
            v.map1.insert(t.clone(), base1 + i);
        }
        v
    }

    pub fn layout(&self) -> Layout {
        Layout {
            n0: 2 + self.tokens0.len(),
            n1: 2 + self.tokens1.len(),
        }
    }

    /// Index count of the language's range, dummies and UNK included.
    pub fn lang_count(&self, lang: Lang) -> usize {
        self.layout().lang_count(lang)
    }

    pub fn n0(&self) -> usize {
        self.layout().n0
    }

    pub fn n1(&self) -> usize {
        self.layout().n1
    }

    /// Total number of global indices, BOS and EOS included.
    pub fn total(&self) -> usize {
        self.layout().total()
    }

    pub fn bos(&self) -> usize {
        BOS
    }

    pub fn eos(&self) -> usize {
        EOS
    }

    pub fn dummy(&self, lang: Lang) -> usize {
        self.layout().dummy(lang)
    }

    pub fn unk(&self, lang: Lang) -> usize {
        self.layout().unk(lang)
    }

    /// Language of a global index; BOS and EOS have none.
    pub fn lang_of(&self, index: usize) -> Option<Lang> {
        self.layout().lang_of(index)
    }

    pub fn surface(&self, index: usize) -> &str {
        match index {
            BOS => BOS_TEXT,
            EOS => EOS_TEXT,
            i if i == self.dummy(Lang::L0) => DUMMY0_TEXT,
            i if i == self.unk(Lang::L0) => UNK0_TEXT,
            i if i == self.dummy(Lang::L1) => DUMMY1_TEXT,
            i if i == self.unk(Lang::L1) => UNK1_TEXT,
            i if i < 2 + self.n0() => &self.tokens0[i - 4],
            i if i < self.total() => &self.tokens1[i - 4 - self.n0()],
            i => panic!("index {i} out of range"),
        }
    }

    pub fn index_of(&self, lang: Lang, text: &str) -> Option<usize> {
        match lang {
            Lang::L0 => self.map0.get(text).copied(),
            Lang::L1 => self.map1.get(text).copied(),
        }
    }

    pub fn encode_token(&self, t: &SurfaceToken) -> Token {
        let index = self
            .index_of(t.lang, &t.text)
            .unwrap_or_else(|| self.unk(t.lang));
        Token {
            lang: t.lang,
            index,
        }
    }

    pub fn encode(&self, tokens: &[SurfaceToken]) -> Utterance {
        Utterance::new(tokens.iter().map(|t| self.encode_token(t)).collect())
    }

    pub fn decode(&self, tokens: &[Token]) -> Vec<SurfaceToken> {
        tokens
            .iter()
            .map(|t| SurfaceToken::new(self.surface(t.index), t.lang))
            .collect()
    }

    /// Number of indices the models assign probability to.
    pub fn scorable_count(&self) -> usize {
        self.layout().scorable_count()
    }

    /// Maps a global index into the scorable range; dummies and BOS map to
    /// nothing.
    pub fn to_scorable(&self, index: usize) -> Option<usize> {
        self.layout().to_scorable(index)
    }

    pub fn from_scorable(&self, s: usize) -> usize {
        self.layout().from_scorable(s)
    }

    pub fn save_tsv(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = String::new();
        let rows = self.tsv_rows();
        for (bit, text, idx) in rows {
            out.push_str(&format!("{bit}\t{text}\t{idx}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    fn tsv_rows(&self) -> Vec<(String, &str, usize)> {
        let mut rows = vec![
            ("-".to_string(), BOS_TEXT, BOS),
            ("-".to_string(), EOS_TEXT, EOS),
            ("0".to_string(), DUMMY0_TEXT, self.dummy(Lang::L0)),
            ("0".to_string(), UNK0_TEXT, self.unk(Lang::L0)),
            ("1".to_string(), DUMMY1_TEXT, self.dummy(Lang::L1)),
            ("1".to_string(), UNK1_TEXT, self.unk(Lang::L1)),
        ];
        for (i, t) in self.tokens0.iter().enumerate() {
            rows.push(("0".to_string(), t, 4 + i));
        }
        for (i, t) in self.tokens1.iter().enumerate() {
            rows.push(("1".to_string(), t, 4 + self.n0() + i));
        }
        rows
    }

    pub fn load_tsv(path: &Path) -> Result<Vocabulary, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        let mut tokens0 = Vec::new();
        let mut tokens1 = Vec::new();
        let mut seen: Vec<(String, String, usize)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut f = line.split('\t');
            let (bit, tok, idx) = (f.next(), f.next(), f.next());
            let (bit, tok, idx) = match (bit, tok, idx, f.next()) {
                (Some(b), Some(t), Some(i), None) => (b, t, i),
                _ => {
                    return Err(CorpusError::Format(format!(
                        "vocabulary line {}: want 3 tab-separated fields",
                        lineno + 1
                    )))
                }
            };
            let idx: usize = idx.parse().map_err(|_| {
                CorpusError::Format(format!("vocabulary line {}: bad index", lineno + 1))
            })?;
            seen.push((bit.to_string(), tok.to_string(), idx));
            // The first six rows are the specials; everything after is a
            // real token, whatever its surface looks like.
            if lineno >= 6 {
                match bit {
                    "0" => tokens0.push(tok.to_string()),
                    "1" => tokens1.push(tok.to_string()),
                    _ => {
                        return Err(CorpusError::Format(format!(
                            "vocabulary line {}: bad language bit {bit:?}",
                            lineno + 1
                        )))
                    }
                }
            }
        }
        let v = Vocabulary::from_token_lists(tokens0, tokens1, 1);
        // The file must describe exactly the layout we reconstruct.
        let expect = v.tsv_rows();
        if seen.len() != expect.len() {
            return Err(CorpusError::Format(format!(
                "vocabulary has {} rows, layout wants {}",
                seen.len(),
                expect.len()
            )));
        }
        for ((bit, tok, idx), (ebit, etok, eidx)) in seen.iter().zip(&expect) {
            if bit != ebit || tok != etok || idx != eidx {
                return Err(CorpusError::Format(format!(
                    "vocabulary row ({bit}, {tok}, {idx}) does not match layout ({ebit}, {etok}, {eidx})"
                )));
            }
        }
        Ok(v)
    }
}

/// Builds the vocabulary from tokenized utterances. Forms seen at least
/// `min_count` times get their own index, ordered by descending frequency
/// with lexicographic tie-breaks so the assignment is reproducible.
pub fn build_vocabulary(
    utterances: &[Vec<SurfaceToken>],
    min_count: usize,
) -> Result<Vocabulary, CorpusError> {
    assert!(min_count >= 1, "min_count must be at least 1");
    let mut counts0: HashMap<&str, usize> = HashMap::new();
    let mut counts1: HashMap<&str, usize> = HashMap::new();
    let mut total = 0usize;
    for utt in utterances {
        for t in utt {
            total += 1;
            let m = match t.lang {
                Lang::L0 => &mut counts0,
                Lang::L1 => &mut counts1,
            };
            *m.entry(t.text.as_str()).or_insert(0) += 1;
        }
    }
    if total == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let rank = |counts: HashMap<&str, usize>| -> Vec<String> {
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        kept.into_iter().map(|(t, _)| t.to_string()).collect()
    };
    Ok(Vocabulary::from_token_lists(
        rank(counts0),
        rank(counts1),
        min_count,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::token::tokenize_utterance;

    fn vocab_of(lines: &[&str], min_count: usize) -> Vocabulary {
        let utts: Vec<_> = lines
            .iter()
            .map(|l| tokenize_utterance(l).unwrap())
            .collect();
        build_vocabulary(&utts, min_count).unwrap()
    }

    #[test]
    fn min_count_threshold_drops_rare_forms() {
        let v = vocab_of(&["a a b"], 2);
        assert!(v.index_of(Lang::L0, "a").is_some());
        assert!(v.index_of(Lang::L0, "b").is_none());
    }

    #[test]
    fn specials_always_present() {
        let v = vocab_of(&["x"], 1);
        assert_eq!(v.surface(v.bos()), BOS_TEXT);
        assert_eq!(v.surface(v.eos()), EOS_TEXT);
        assert_eq!(v.surface(v.dummy(Lang::L0)), DUMMY0_TEXT);
        assert_eq!(v.surface(v.dummy(Lang::L1)), DUMMY1_TEXT);
        assert_eq!(v.surface(v.unk(Lang::L0)), UNK0_TEXT);
        assert_eq!(v.surface(v.unk(Lang::L1)), UNK1_TEXT);
    }

    // 5 distinct L0 words, 3 occurrences each: range is 2 specials + 5.
    #[test]
    fn range_size_counts_specials() {
        let v = vocab_of(&["p q r s t", "p q r s t", "p q r s t"], 1);
        assert_eq!(v.n0(), 7);
        assert_eq!(v.n1(), 2);
        assert_eq!(v.total(), 2 + 7 + 2);
    }

    #[test]
    fn index_assignment_frequency_then_lexicographic() {
        let v = vocab_of(&["b b c a a"], 1);
        // a and b both occur twice; a wins the tie. c comes after.
        assert_eq!(v.index_of(Lang::L0, "a"), Some(4));
        assert_eq!(v.index_of(Lang::L0, "b"), Some(5));
        assert_eq!(v.index_of(Lang::L0, "c"), Some(6));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            build_vocabulary(&[], 1),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn oov_encodes_to_language_unk() {
        let v = vocab_of(&["hello 你"], 1);
        let t = v.encode_token(&SurfaceToken::new("unseen", Lang::L0));
        assert_eq!(t.index, v.unk(Lang::L0));
        let t = v.encode_token(&SurfaceToken::new("好", Lang::L1));
        assert_eq!(t.index, v.unk(Lang::L1));
    }

    #[test]
    fn encode_decode_roundtrip_in_vocab() {
        let v = vocab_of(&["we went 到 那 里 again"], 1);
        let surface = tokenize_utterance("we went 到 里").unwrap();
        let utt = v.encode(&surface);
        assert_eq!(v.decode(&utt.tokens), surface);
    }

    #[test]
    fn lang_of_matches_ranges() {
        let v = vocab_of(&["go 去"], 1);
        assert_eq!(v.lang_of(BOS), None);
        assert_eq!(v.lang_of(EOS), None);
        assert_eq!(v.lang_of(v.index_of(Lang::L0, "go").unwrap()), Some(Lang::L0));
        assert_eq!(v.lang_of(v.index_of(Lang::L1, "去").unwrap()), Some(Lang::L1));
        assert_eq!(v.lang_of(v.dummy(Lang::L1)), Some(Lang::L1));
    }

    #[test]
    fn scorable_mapping_is_a_bijection_without_dummies() {
        let v = vocab_of(&["a b 一 二 三"], 1);
        let s = v.scorable_count();
        // n0 = 2+2, n1 = 2+3, scorable = 3 + 4 + 1
        assert_eq!(s, 8);
        let mut seen = vec![false; s];
        for idx in 0..v.total() {
            match v.to_scorable(idx) {
                Some(si) => {
                    assert_eq!(v.from_scorable(si), idx);
                    assert!(!seen[si]);
                    seen[si] = true;
                }
                None => assert!(
                    idx == BOS || idx == v.dummy(Lang::L0) || idx == v.dummy(Lang::L1)
                ),
            }
        }
        assert!(seen.iter().all(|b| *b));
        // EOS is last.
        assert_eq!(v.from_scorable(s - 1), EOS);
    }

    #[test]
    fn tsv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        let v = vocab_of(&["one two 一 二", "one 一"], 1);
        v.save_tsv(&path).unwrap();
        let back = Vocabulary::load_tsv(&path).unwrap();
        assert_eq!(v.tokens0, back.tokens0);
        assert_eq!(v.tokens1, back.tokens1);
        assert_eq!(v.total(), back.total());
    }

    #[test]
    fn tsv_rejects_shuffled_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        let v = vocab_of(&["one two"], 1);
        v.save_tsv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(6, 7);
        std::fs::write(&path, lines.join("\n")).unwrap();
        assert!(Vocabulary::load_tsv(&path).is_err());
    }
}
