//! The experiment directory: one fixed layout shared by every command.
//!
//! ```text
//! exp/
//!   config.resolved     every config key after defaults and overrides
//!   vocab.tsv           token table, built by prep
//!   splits/             train.txt / dev.txt / test.txt (raw lines),
//!                       plus NAME.features.tsv sidecars when present
//!   checkpoints/        model snapshots
//!   logs/               per-epoch and per-round TSVs
//!   reports/            evaluation, sampling and novelty TSVs
//! ```

use std::path::{Path, PathBuf};

use cslm_core::corpus::{
    derive_lang_features, load_features, tokenize_utterance, CorpusError, FeatureDecl, Utterance,
    Vocabulary,
};
use cslm_core::model::file_sha256;

use crate::Failure;

pub const SPLIT_NAMES: [&str; 3] = ["train", "dev", "test"];

pub struct ExperimentDir {
    pub root: PathBuf,
}

impl ExperimentDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ExperimentDir { root: root.into() }
    }

    pub fn create(&self) -> std::io::Result<()> {
        for sub in ["splits", "checkpoints", "logs", "reports"] {
            std::fs::create_dir_all(self.root.join(sub))?;
        }
        Ok(())
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.resolved")
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.root.join("vocab.tsv")
    }

    pub fn split_path(&self, name: &str) -> PathBuf {
        self.root.join("splits").join(format!("{name}.txt"))
    }

    pub fn features_path(&self, name: &str) -> PathBuf {
        self.root.join("splits").join(format!("{name}.features.tsv"))
    }

    pub fn checkpoint_path(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }

    pub fn log_path(&self, name: &str) -> PathBuf {
        self.root.join("logs").join(name)
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    /// The vocabulary and the digest that ties checkpoints to it.
    pub fn vocab(&self) -> Result<(Vocabulary, String), Failure> {
        let path = self.vocab_path();
        if !path.exists() {
            return Err(Failure::Data(format!(
                "{} not found; run prep first",
                path.display()
            )));
        }
        let vocab = Vocabulary::load_tsv(&path)?;
        let digest = file_sha256(&path)?;
        Ok((vocab, digest))
    }

    /// Reads and encodes one split, returning the utterances and the
    /// feature declarations they carry. A feature sidecar written by prep
    /// wins; otherwise `lang_feature` derives the language-bit channel.
    pub fn load_split(
        &self,
        name: &str,
        vocab: &Vocabulary,
        lang_feature: bool,
    ) -> Result<(Vec<Utterance>, Vec<FeatureDecl>), Failure> {
        let path = self.split_path(name);
        if !path.exists() {
            return Err(Failure::Data(format!(
                "{} not found; run prep first",
                path.display()
            )));
        }
        let surfaces = read_corpus_lines(&path)?;
        let mut utts: Vec<Utterance> = Vec::with_capacity(surfaces.len());
        for (_, toks) in &surfaces {
            utts.push(vocab.encode(toks));
        }
        let sidecar = self.features_path(name);
        if sidecar.exists() {
            if lang_feature {
                return Err(Failure::Config(format!(
                    "features.lang = true conflicts with the prepared feature file {}",
                    sidecar.display()
                )));
            }
            let ff = load_features(&sidecar, &utts)
                .map_err(|e| Failure::Data(format!("{}: {e}", sidecar.display())))?;
            let decls = ff.decls.clone();
            ff.attach(&mut utts);
            Ok((utts, decls))
        } else if lang_feature {
            let ff = derive_lang_features(&utts);
            let decls = ff.decls.clone();
            ff.attach(&mut utts);
            Ok((utts, decls))
        } else {
            Ok((utts, Vec::new()))
        }
    }
}

/// Like `corpus::read_corpus`, but keeps each raw line next to its tokens
/// so callers can partition or rewrite the original text.
pub fn read_corpus_lines(
    path: &Path,
) -> Result<Vec<(String, Vec<cslm_core::corpus::SurfaceToken>)>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push((line.to_string(), tokenize_utterance(line)?));
    }
    if out.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cslm_core::corpus::{build_vocabulary, write_features, Lang};

    fn setup() -> (tempfile::TempDir, ExperimentDir, Vocabulary) {
        let dir = tempfile::tempdir().unwrap();
        let exp = ExperimentDir::new(dir.path().join("exp"));
        exp.create().unwrap();
        std::fs::write(exp.split_path("train"), "go 吧 go\nok 好\n").unwrap();
        let surfaces = read_corpus_lines(&exp.split_path("train")).unwrap();
        let toks: Vec<_> = surfaces.into_iter().map(|(_, t)| t).collect();
        let vocab = build_vocabulary(&toks, 1).unwrap();
        vocab.save_tsv(&exp.vocab_path()).unwrap();
        (dir, exp, vocab)
    }

    #[test]
    fn split_loads_and_encodes() {
        let (_d, exp, vocab) = setup();
        let (utts, decls) = exp.load_split("train", &vocab, false).unwrap();
        assert_eq!(utts.len(), 2);
        assert_eq!(utts[0].tokens.len(), 3);
        assert!(utts[0].features.is_none());
        assert!(decls.is_empty());
    }

    #[test]
    fn lang_feature_is_derived_when_no_sidecar() {
        let (_d, exp, vocab) = setup();
        let (utts, decls) = exp.load_split("train", &vocab, true).unwrap();
        let f = utts[0].features.as_ref().unwrap();
        assert_eq!(f[0].values, vec![("lang".to_string(), 0)]);
        assert_eq!(f[1].values, vec![("lang".to_string(), 1)]);
        assert_eq!(decls.len(), 1);
        assert_eq!(decls[0].cardinality, 2);
    }

    #[test]
    fn sidecar_features_attach_and_conflict_with_lang_flag() {
        let (_d, exp, vocab) = setup();
        let (utts, _) = exp.load_split("train", &vocab, false).unwrap();
        let ff = derive_lang_features(&utts);
        write_features(&exp.features_path("train"), &ff.decls, &ff.rows).unwrap();
        let (with, decls) = exp.load_split("train", &vocab, false).unwrap();
        assert!(with[0].features.is_some());
        assert_eq!(decls.len(), 1);
        assert!(matches!(
            exp.load_split("train", &vocab, true),
            Err(Failure::Config(_))
        ));
    }

    #[test]
    fn vocab_digest_tracks_file() {
        let (_d, exp, _v) = setup();
        let (v1, d1) = exp.vocab().unwrap();
        assert_eq!(v1.lang_count(Lang::L0), 2 + 2);
        let bigger = build_vocabulary(
            &[tokenize_utterance("go ok zzz 吧 好").unwrap()],
            1,
        )
        .unwrap();
        bigger.save_tsv(&exp.vocab_path()).unwrap();
        let (v2, d2) = exp.vocab().unwrap();
        assert_ne!(d1, d2);
        assert_eq!(v2.lang_count(Lang::L0), 2 + 3);
    }

    #[test]
    fn missing_pieces_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let exp = ExperimentDir::new(dir.path().join("nothing"));
        assert!(matches!(exp.vocab(), Err(Failure::Data(_))));
        let (_d, exp, vocab) = setup();
        assert!(matches!(
            exp.load_split("dev", &vocab, false),
            Err(Failure::Data(_))
        ));
    }
}
