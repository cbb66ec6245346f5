use std::collections::HashMap;
use std::path::Path;

use unicode_segmentation::UnicodeSegmentation;

use super::RepresentError;

const BUILTIN_LEXICON: &str = include_str!("../../data/lemmas.tsv");

/// Lookup-table lemmatizer. Tokens are lowercased before lookup; tokens
/// missing from the table pass through (lowercased).
#[derive(Debug, Clone, Default)]
pub struct Lemmatizer {
    table: HashMap<String, String>,
}

impl Lemmatizer {
    /// The lexicon shipped with the crate: irregular forms plus regular
    /// inflections of a finance-oriented base vocabulary.
    pub fn builtin() -> Self {
        Self::parse_tsv(BUILTIN_LEXICON).expect("builtin lexicon is well-formed")
    }

    pub fn from_tsv_file(path: &Path) -> Result<Self, RepresentError> {
        let text = std::fs::read_to_string(path).map_err(|source| RepresentError::Io { path: path.to_path_buf(), source })?;
        Self::parse_tsv(&text)
    }

    /// Parses `inflected_form<TAB>lemma` lines; `#` starts a comment line.
    pub fn parse_tsv(text: &str) -> Result<Self, RepresentError> {
        let mut table = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (form, lemma) = line.split_once('\t').ok_or_else(|| RepresentError::Malformed {
                line: idx + 1,
                reason: "expected `inflected_form<TAB>lemma`".into(),
            })?;
            table.insert(form.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        Ok(Self { table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.table.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn lemma(&self, token: &str) -> String {
        let lower = token.to_lowercase();
        match self.table.get(&lower) {
            Some(lemma) => lemma.clone(),
            None => lower,
        }
    }

    /// Word-tokenizes `text`, drops possessive markers and punctuation, and
    /// joins the lemmas with single spaces.
    pub fn lemmatize_phrase(&self, text: &str) -> String {
        text.unicode_words()
            .map(|w| {
                let w = w
                    .strip_suffix("'s")
                    .or_else(|| w.strip_suffix("\u{2019}s"))
                    .filter(|stem| !stem.is_empty())
                    .unwrap_or(w);
                self.lemma(w)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}
