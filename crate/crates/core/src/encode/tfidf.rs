use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use super::{EncodeError, SparseVector, VectorSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Minimum number of documents an ngram must occur in.
    pub min_df: usize,
    pub lowercase: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self { ngram_min: 1, ngram_max: 2, min_df: 2, lowercase: true }
    }
}

/// Fitted vocabulary and smoothed idf weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub config: TfidfConfig,
    /// ngram -> column; columns follow the lexicographic order of the ngrams.
    pub vocabulary: BTreeMap<String, u32>,
    /// Column-aligned idf weights.
    pub idf: Vec<f64>,
    pub n_documents: usize,
}

impl TfidfConfig {
    fn ngrams(&self, text: &str) -> Vec<String> {
        let owned;
        let text = if self.lowercase {
            owned = text.to_lowercase();
            &owned
        } else {
            text
        };
        let tokens: Vec<&str> = text.unicode_words().collect();
        let lo = self.ngram_min.max(1);
        let mut out = Vec::new();
        for n in lo..=self.ngram_max {
            if n > tokens.len() {
                break;
            }
            out.extend(tokens.windows(n).map(|w| w.join(" ")));
        }
        out
    }
}

/// Fits a vocabulary and idf(t) = ln((1 + N) / (1 + df(t))) + 1.
pub fn fit_tfidf(texts: &[String], config: &TfidfConfig) -> Result<TfidfModel, EncodeError> {
    if texts.is_empty() {
        return Err(EncodeError::EmptyInput);
    }
    let per_doc: Vec<Vec<String>> = texts
        .par_iter()
        .map(|t| {
            let mut grams = config.ngrams(t);
            grams.sort_unstable();
            grams.dedup();
            grams
        })
        .collect();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for grams in per_doc {
        for g in grams {
            *df.entry(g).or_default() += 1;
        }
    }
    let n = texts.len() as f64;
    let mut vocabulary = BTreeMap::new();
    let mut idf = Vec::new();
    for (gram, count) in df.into_iter().filter(|(_, c)| *c >= config.min_df.max(1)) {
        vocabulary.insert(gram, idf.len() as u32);
        idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
    }
    if vocabulary.is_empty() {
        return Err(EncodeError::EmptyVocabulary);
    }
    Ok(TfidfModel { config: config.clone(), vocabulary, idf, n_documents: texts.len() })
}

impl TfidfModel {
    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Raw counts times idf, L2-normalized. Out-of-vocabulary ngrams are
    /// ignored; a text with none in vocabulary maps to the zero vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for gram in self.config.ngrams(text) {
            if let Some(&col) = self.vocabulary.get(&gram) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(u32, f64)> =
            counts.into_iter().map(|(col, tf)| (col, tf * self.idf[col as usize])).collect();
        entries.sort_unstable_by_key(|(col, _)| *col);
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            entries.iter_mut().for_each(|(_, v)| *v /= norm);
        }
        SparseVector {
            indices: entries.iter().map(|(c, _)| *c).collect(),
            values: entries.iter().map(|(_, v)| *v).collect(),
        }
    }

    pub fn transform_all(&self, ids: Vec<String>, texts: &[String]) -> Result<VectorSet, EncodeError> {
        let rows: Vec<SparseVector> = texts.par_iter().map(|t| self.transform(t)).collect();
        let mut set = VectorSet::sparse(ids, self.dim(), rows)?;
        set.mark_normalized();
        Ok(set)
    }

    pub fn idf_of(&self, gram: &str) -> Option<f64> {
        self.vocabulary.get(gram).map(|&c| self.idf[c as usize])
    }
}
