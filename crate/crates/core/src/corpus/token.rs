//! Script-based tokenization.
//!
//! The token unit differs by language: whitespace-delimited words for the
//! Latin-script side (L0), single Han codepoints for the other (L1). A
//! chunk mixing both scripts is split at script boundaries, so "ok的la"
//! yields three tokens. Digits and punctuation ride along with adjacent
//! Latin characters.

use super::CorpusError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lang {
    L0,
    L1,
}

impl Lang {
    pub fn bit(self) -> usize {
        match self {
            Lang::L0 => 0,
            Lang::L1 => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Lang {
        match bit {
            0 => Lang::L0,
            1 => Lang::L1,
            _ => panic!("language bit must be 0 or 1, got {bit}"),
        }
    }

    pub fn other(self) -> Lang {
        match self {
            Lang::L0 => Lang::L1,
            Lang::L1 => Lang::L0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurfaceToken {
    pub text: String,
    pub lang: Lang,
}

impl SurfaceToken {
    pub fn new(text: impl Into<String>, lang: Lang) -> Self {
        SurfaceToken {
            text: text.into(),
            lang,
        }
    }
}

/// Whether `c` is a Han ideograph. Covers the unified block, extension A,
/// the compatibility block, and the supplementary-plane extensions. CJK
/// punctuation and kana are deliberately excluded; they tokenize as L0.
pub fn is_han(c: char) -> bool {
    matches!(c,
        '\u{4E00}'..='\u{9FFF}'
        | '\u{3400}'..='\u{4DBF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{20000}'..='\u{2A6DF}'
        | '\u{2A700}'..='\u{2EBEF}')
}

/// Splits a raw line into surface tokens. Each Han codepoint becomes one
/// L1 token; maximal non-Han runs inside a whitespace-delimited chunk
/// become single lowercased L0 tokens. A line with no tokens at all is an
/// error so callers notice blank or whitespace-only input.
pub fn tokenize_utterance(line: &str) -> Result<Vec<SurfaceToken>, CorpusError> {
    let mut out = Vec::new();
    for chunk in line.split_whitespace() {
        let mut run = String::new();
        for c in chunk.chars() {
            if is_han(c) {
                if !run.is_empty() {
                    out.push(SurfaceToken::new(std::mem::take(&mut run), Lang::L0));
                }
                out.push(SurfaceToken::new(c.to_string(), Lang::L1));
            } else {
                run.extend(c.to_lowercase());
            }
        }
        if !run.is_empty() {
            out.push(SurfaceToken::new(run, Lang::L0));
        }
    }
    if out.is_empty() {
        return Err(CorpusError::EmptyUtterance);
    }
    Ok(out)
}
