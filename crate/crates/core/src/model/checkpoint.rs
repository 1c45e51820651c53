//! Model checkpoints: a text header describing the architecture, then the
//! parameter store. The header carries a digest of the vocabulary file so a
//! checkpoint cannot silently be scored against the wrong token table.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{FeatureDecl, Layout};
use crate::numerics::{load_params_from, save_params_to, RngState, StoreError};

use super::{Lm, ModelDims};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Dual,
    Rnn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Dual => "dual",
            ModelKind::Rnn => "rnn",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "dual" => Some(ModelKind::Dual),
            "rnn" => Some(ModelKind::Rnn),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint was built against a different vocabulary (digest {stored}, ours {ours})")]
    VocabMismatch { stored: String, ours: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

pub fn save_model(path: &Path, lm: &Lm, vocab_digest: &str) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    let layout = lm.layout();
    let dims = lm.dims();
    writeln!(w, "model {}", lm.kind().as_str())?;
    writeln!(w, "hidden {}", dims.hidden)?;
    writeln!(w, "embed {}", dims.embed)?;
    writeln!(w, "n0 {}", layout.n0)?;
    writeln!(w, "n1 {}", layout.n1)?;
    writeln!(w, "vocab {vocab_digest}")?;
    if lm.features().is_empty() {
        writeln!(w, "features none")?;
    } else {
        let decls: Vec<String> = lm
            .features()
            .iter()
            .map(|f| format!("{}:{}", f.name, f.cardinality))
            .collect();
        writeln!(w, "features {}", decls.join(" "))?;
    }
    writeln!(w, "params")?;
    save_params_to(&mut w, lm.ps())?;
    w.flush()?;
    Ok(())
}

fn read_line_bytes<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    // Byte-wise so the reader stays positioned exactly at the payload.
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(CheckpointError::Header("unexpected end of file".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
    }
    String::from_utf8(line).map_err(|_| CheckpointError::Header("non-utf8 line".into()))
}

/// Reads a checkpoint back into a model. When `expect_vocab` is given, the
/// stored vocabulary digest must match it exactly.
pub fn load_model(path: &Path, expect_vocab: Option<&str>) -> Result<Lm, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut kind = None;
    let mut hidden = None;
    let mut embed = None;
    let mut n0 = None;
    let mut n1 = None;
    let mut vocab = None;
    let mut features: Vec<FeatureDecl> = Vec::new();
    loop {
        let line = read_line_bytes(&mut r)?;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("model") => {
                let name = fields
                    .next()
                    .ok_or_else(|| CheckpointError::Header("missing model kind".into()))?;
                kind = Some(ModelKind::parse(name).ok_or_else(|| {
                    CheckpointError::Header(format!("unknown model kind {name:?}"))
                })?);
            }
            Some("hidden") => hidden = parse_field(&mut fields, "hidden")?,
            Some("embed") => embed = parse_field(&mut fields, "embed")?,
            Some("n0") => n0 = parse_field(&mut fields, "n0")?,
            Some("n1") => n1 = parse_field(&mut fields, "n1")?,
            Some("vocab") => {
                vocab = Some(
                    fields
                        .next()
                        .ok_or_else(|| CheckpointError::Header("missing vocab digest".into()))?
                        .to_string(),
                );
            }
            Some("features") => {
                for field in fields {
                    if field == "none" {
                        break;
                    }
                    let (name, card) = field.split_once(':').ok_or_else(|| {
                        CheckpointError::Header(format!("bad feature decl {field:?}"))
                    })?;
                    let cardinality = card.parse().map_err(|_| {
                        CheckpointError::Header(format!("bad feature cardinality {card:?}"))
                    })?;
                    features.push(FeatureDecl {
                        name: name.to_string(),
                        cardinality,
                    });
                }
            }
            Some("params") => break,
            other => {
                return Err(CheckpointError::Header(format!(
                    "unexpected header line {other:?}"
                )))
            }
        }
    }
    let kind = kind.ok_or_else(|| CheckpointError::Header("missing model line".into()))?;
    let dims = ModelDims {
        hidden: hidden.ok_or_else(|| CheckpointError::Header("missing hidden".into()))?,
        embed: embed.ok_or_else(|| CheckpointError::Header("missing embed".into()))?,
    };
    let layout = Layout {
        n0: n0.ok_or_else(|| CheckpointError::Header("missing n0".into()))?,
        n1: n1.ok_or_else(|| CheckpointError::Header("missing n1".into()))?,
    };
    let stored = vocab.ok_or_else(|| CheckpointError::Header("missing vocab digest".into()))?;
    if let Some(ours) = expect_vocab {
        if stored != ours {
            return Err(CheckpointError::VocabMismatch {
                stored,
                ours: ours.to_string(),
            });
        }
    }
    // Build with an arbitrary seed; every value is overwritten by the store.
    let mut rng = RngState::seeded(0);
    let mut lm = Lm::new(kind, layout, dims, &features, &mut rng);
    load_params_from(&mut r, lm.ps_mut())?;
    Ok(lm)
}

fn parse_field(
    fields: &mut std::str::SplitWhitespace,
    what: &str,
) -> Result<Option<usize>, CheckpointError> {
    fields
        .next()
        .and_then(|s| s.parse().ok())
        .map(Some)
        .ok_or_else(|| CheckpointError::Header(format!("bad {what} line")))
}
