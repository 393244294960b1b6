//! Word lists backing the text features.
//!
//! Each list is a UTF-8 file with one term per line; `#` starts a comment and
//! a `# version: N` line records the list version. The crate embeds the
//! default lists and deployments may load edited copies from a directory.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
    #[error("terms {0:?} appear in both the positive and negative sentiment lists")]
    OverlappingSentiment(Vec<String>),
}

/// A named word list with its declared version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    pub version: Option<String>,
    pub terms: HashSet<String>,
}

impl WordList {
    pub fn parse(text: &str) -> Self {
        let mut version = None;
        let mut terms = HashSet::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_string());
                }
                continue;
            }
            if !line.is_empty() {
                terms.insert(line.to_string());
            }
        }
        WordList { version, terms }
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }
}

/// All word lists used by feature extraction.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub stopwords: WordList,
    pub keywords: WordList,
    pub sentiment_pos: WordList,
    pub sentiment_neg: WordList,
    pub sentiment_negation: WordList,
    pub confirmatory: WordList,
    pub gratitude: WordList,
}

const FILES: [&str; 7] = [
    "stopwords.txt",
    "keywords.txt",
    "sentiment_pos.txt",
    "sentiment_neg.txt",
    "sentiment_negation.txt",
    "confirmatory.txt",
    "gratitude.txt",
];

const BUILTIN: [&str; 7] = [
    include_str!("../../data/stopwords.txt"),
    include_str!("../../data/keywords.txt"),
    include_str!("../../data/sentiment_pos.txt"),
    include_str!("../../data/sentiment_neg.txt"),
    include_str!("../../data/sentiment_negation.txt"),
    include_str!("../../data/confirmatory.txt"),
    include_str!("../../data/gratitude.txt"),
];

impl Lexicons {
    /// The lists shipped with the crate.
    pub fn builtin() -> &'static Lexicons {
        static CELL: OnceLock<Lexicons> = OnceLock::new();
        CELL.get_or_init(|| {
            Lexicons::from_texts(BUILTIN).expect("builtin lexicons are consistent")
        })
    }

    /// Loads lists from `dir`; files absent there fall back to the builtin copy.
    pub fn from_dir(dir: &Path) -> Result<Lexicons, LexiconError> {
        let mut texts: [String; 7] = Default::default();
        for (i, name) in FILES.iter().enumerate() {
            let path = dir.join(name);
            texts[i] = if path.exists() {
                std::fs::read_to_string(&path).map_err(|source| LexiconError::Io {
                    file: name.to_string(),
                    source,
                })?
            } else {
                BUILTIN[i].to_string()
            };
        }
        Lexicons::from_texts(texts.each_ref().map(String::as_str))
    }

    fn from_texts(t: [&str; 7]) -> Result<Lexicons, LexiconError> {
        let lex = Lexicons {
            stopwords: WordList::parse(t[0]),
            keywords: WordList::parse(t[1]),
            sentiment_pos: WordList::parse(t[2]),
            sentiment_neg: WordList::parse(t[3]),
            sentiment_negation: WordList::parse(t[4]),
            confirmatory: WordList::parse(t[5]),
            gratitude: WordList::parse(t[6]),
        };
        let mut overlap: Vec<String> = lex
            .sentiment_pos
            .terms
            .intersection(&lex.sentiment_neg.terms)
            .cloned()
            .collect();
        if !overlap.is_empty() {
            overlap.sort();
            return Err(LexiconError::OverlappingSentiment(overlap));
        }
        Ok(lex)
    }

    /// Declared version of every list, keyed by file name.
    pub fn versions(&self) -> BTreeMap<&'static str, Option<String>> {
        [
            &self.stopwords,
            &self.keywords,
            &self.sentiment_pos,
            &self.sentiment_neg,
            &self.sentiment_negation,
            &self.confirmatory,
            &self.gratitude,
        ]
        .into_iter()
        .zip(FILES)
        .map(|(l, f)| (f, l.version.clone()))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lists_load() {
        let lex = Lexicons::builtin();
        assert!(lex.stopwords.contains("this"));
        assert!(!lex.stopwords.contains("refactor"));
        assert!(lex.keywords.contains("null"));
        assert!(!lex.keywords.contains("use"));
        assert!(lex.versions().values().all(|v| v.as_deref() == Some("1")));
    }

    #[test]
    fn overlapping_sentiment_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("sentiment_neg.txt"), "good\nbad\n").unwrap();
        match Lexicons::from_dir(dir.path()) {
            Err(LexiconError::OverlappingSentiment(t)) => assert_eq!(t, vec!["good".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn directory_overrides_individual_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("gratitude.txt"), "# version: 7\ncheers\n").unwrap();
        let lex = Lexicons::from_dir(dir.path()).unwrap();
        assert!(lex.gratitude.contains("cheers"));
        assert!(!lex.gratitude.contains("thanks"));
        assert_eq!(lex.gratitude.version.as_deref(), Some("7"));
        assert!(lex.stopwords.contains("the"));
    }
}
