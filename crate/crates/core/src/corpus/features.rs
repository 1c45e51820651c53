//! Side features aligned one-to-one with corpus tokens.
//!
//! Features arrive from files rather than being computed here; upstream
//! taggers and clusterers produce them offline. File layout:
//!
//! ```text
//! lang:2\tcluster:70                 header: name:cardinality per feature
//! lang=0|cluster=12\tlang=1|cluster=3   one line per utterance,
//! ...                                    one tab-separated entry per token
//! ```

use std::path::Path;

use super::vocab::Utterance;
use super::CorpusError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureDecl {
    pub name: String,
    pub cardinality: usize,
}

/// One token's categories, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVector {
    pub values: Vec<(String, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureFile {
    pub decls: Vec<FeatureDecl>,
    pub rows: Vec<Vec<FeatureVector>>,
}

impl FeatureFile {
    /// Moves the rows onto their utterances. Lengths were validated at load.
    pub fn attach(self, utterances: &mut [Utterance]) {
        assert_eq!(self.rows.len(), utterances.len());
        for (utt, row) in utterances.iter_mut().zip(self.rows) {
            utt.features = Some(row);
        }
    }
}

fn parse_header(line: &str) -> Result<Vec<FeatureDecl>, CorpusError> {
    let mut decls = Vec::new();
    for field in line.split('\t') {
        let (name, card) = field.split_once(':').ok_or_else(|| {
            CorpusError::Format(format!("feature header field {field:?}: want name:cardinality"))
        })?;
        let cardinality: usize = card.parse().map_err(|_| {
            CorpusError::Format(format!("feature {name}: bad cardinality {card:?}"))
        })?;
        if name.is_empty() || cardinality == 0 {
            return Err(CorpusError::Format(format!(
                "feature {name:?} with cardinality {cardinality} is degenerate"
            )));
        }
        decls.push(FeatureDecl {
            name: name.to_string(),
            cardinality,
        });
    }
    if decls.is_empty() {
        return Err(CorpusError::Format("empty feature header".into()));
    }
    Ok(decls)
}

/// Reads a feature file and validates it token-by-token against
/// `utterances`: line counts, per-line token counts, category ranges, and
/// agreement of any feature named "lang" with the token's language bit.
pub fn load_features(
    path: &Path,
    utterances: &[Utterance],
) -> Result<FeatureFile, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CorpusError::Format("feature file is empty".into()))?;
    let decls = parse_header(header)?;

    let mut rows = Vec::with_capacity(utterances.len());
    for (i, utt) in utterances.iter().enumerate() {
        // Feature lines are 1-based and offset by the header.
        let lineno = i + 2;
        let line = lines.next().ok_or_else(|| {
            CorpusError::Alignment(format!(
                "feature file ends at utterance {i}: expected line {lineno}"
            ))
        })?;
        let entries: Vec<&str> = line.split('\t').collect();
        if entries.len() != utt.len() {
            return Err(CorpusError::Alignment(format!(
                "line {lineno}: {} feature entries for {} tokens",
                entries.len(),
                utt.len()
            )));
        }
        let mut row = Vec::with_capacity(entries.len());
        for (t, entry) in utt.tokens.iter().zip(entries) {
            let mut values: Vec<Option<usize>> = vec![None; decls.len()];
            for pair in entry.split('|') {
                let (name, id) = pair.split_once('=').ok_or_else(|| {
                    CorpusError::Format(format!("line {lineno}: bad feature pair {pair:?}"))
                })?;
                let di = decls.iter().position(|d| d.name == name).ok_or_else(|| {
                    CorpusError::Format(format!("line {lineno}: undeclared feature {name:?}"))
                })?;
                let id: usize = id.parse().map_err(|_| {
                    CorpusError::Format(format!("line {lineno}: bad category {id:?}"))
                })?;
                if id >= decls[di].cardinality {
                    return Err(CorpusError::Format(format!(
                        "line {lineno}: category {id} exceeds cardinality {} of {}",
                        decls[di].cardinality, name
                    )));
                }
                if values[di].replace(id).is_some() {
                    return Err(CorpusError::Format(format!(
                        "line {lineno}: duplicate feature {name:?}"
                    )));
                }
                if name == "lang" && id != t.lang.bit() {
                    return Err(CorpusError::Alignment(format!(
                        "line {lineno}: lang feature {id} disagrees with token language {}",
                        t.lang.bit()
                    )));
                }
            }
            let mut out = Vec::with_capacity(decls.len());
            for (d, v) in decls.iter().zip(values) {
                match v {
                    Some(id) => out.push((d.name.clone(), id)),
                    None => {
                        return Err(CorpusError::Format(format!(
                            "line {lineno}: missing feature {:?}",
                            d.name
                        )))
                    }
                }
            }
            row.push(FeatureVector { values: out });
        }
        rows.push(row);
    }
    Ok(FeatureFile { decls, rows })
}

pub fn write_features(
    path: &Path,
    decls: &[FeatureDecl],
    rows: &[Vec<FeatureVector>],
) -> Result<(), CorpusError> {
    let mut out = String::new();
    let header: Vec<String> = decls
        .iter()
        .map(|d| format!("{}:{}", d.name, d.cardinality))
        .collect();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in rows {
        let entries: Vec<String> = row
            .iter()
            .map(|fv| {
                fv.values
                    .iter()
                    .map(|(n, id)| format!("{n}={id}"))
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect();
        out.push_str(&entries.join("\t"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The trivial always-available feature: each token's own language bit.
pub fn derive_lang_features(utterances: &[Utterance]) -> FeatureFile {
    let decls = vec![FeatureDecl {
        name: "lang".to_string(),
        cardinality: 2,
    }];
    let rows = utterances
        .iter()
        .map(|u| {
            u.tokens
                .iter()
                .map(|t| FeatureVector {
                    values: vec![("lang".to_string(), t.lang.bit())],
                })
                .collect()
        })
        .collect();
    FeatureFile { decls, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::token::tokenize_utterance;
    use crate::corpus::vocab::build_vocabulary;

    fn sample_utts(lines: &[&str]) -> Vec<Utterance> {
        let toks: Vec<_> = lines
            .iter()
            .map(|l| tokenize_utterance(l).unwrap())
            .collect();
        let v = build_vocabulary(&toks, 1).unwrap();
        toks.iter().map(|t| v.encode(t)).collect()
    }

    #[test]
    fn roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let utts = sample_utts(&["go 吧", "ok"]);
        let ff = derive_lang_features(&utts);
        write_features(&path, &ff.decls, &ff.rows).unwrap();
        let back = load_features(&path, &utts).unwrap();
        assert_eq!(back, ff);
    }

    #[test]
    fn lang_feature_must_match_token_language() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let utts = sample_utts(&["go 吧"]);
        std::fs::write(&path, "lang:2\nlang=1\tlang=1\n").unwrap();
        assert!(matches!(
            load_features(&path, &utts),
            Err(CorpusError::Alignment(_))
        ));
    }

    #[test]
    fn missing_line_errors_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let utts = sample_utts(&["a", "b"]);
        std::fs::write(&path, "lang:2\nlang=0\n").unwrap();
        let err = load_features(&path, &utts).unwrap_err();
        assert!(err.to_string().contains("utterance 1"), "{err}");
    }

    #[test]
    fn token_count_mismatch_errors_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let utts = sample_utts(&["a b c"]);
        std::fs::write(&path, "lang:2\nlang=0\tlang=0\n").unwrap();
        let err = load_features(&path, &utts).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn category_over_cardinality_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let utts = sample_utts(&["a"]);
        std::fs::write(&path, "cluster:70\ncluster=70\n").unwrap();
        assert!(load_features(&path, &utts).is_err());
        std::fs::write(&path, "cluster:70\ncluster=69\n").unwrap();
        assert!(load_features(&path, &utts).is_ok());
    }

    #[test]
    fn multi_feature_entries_canonicalize_to_header_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let utts = sample_utts(&["a"]);
        std::fs::write(&path, "lang:2\tpos:5\npos=3|lang=0\n").unwrap();
        let ff = load_features(&path, &utts).unwrap();
        assert_eq!(
            ff.rows[0][0].values,
            vec![("lang".to_string(), 0), ("pos".to_string(), 3)]
        );
    }
}
