//! String representations of questions: sentence segmentation and, for the
//! parse track, pronoun rewriting and predicate-argument reduction of
//! externally supplied SRL annotations.

mod coref;
mod lemma;
mod segment;
mod srl;

use std::path::PathBuf;

use thiserror::Error;

pub use coref::{load_coref, resolve_pronouns, CorefChain, CorefDocument, Mention};
pub use lemma::Lemmatizer;
pub use segment::RuleSegmenter;
pub use srl::{
    filter_infinitive_complements, is_modifier, is_nominal, is_subject_or_object, load_srl, reduce_parse,
    reduce_sentence, ReducedString, Reduction, SrlArgument, SrlParse, TokenSpan,
};

#[derive(Debug, Error)]
pub enum RepresentError {
    #[error("failed to read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("mention span {start}..{end} out of range for sentence `{sentence_id}` ({len} chars)")]
    SpanOutOfRange { sentence_id: String, start: usize, end: usize, len: usize },
    #[error("parse for sentence `{sentence_id}` has an empty predicate span")]
    EmptyPredicate { sentence_id: String },
}

/// Splits text into sentences.
pub trait Segmenter {
    fn segment(&self, text: &str) -> Vec<String>;
}
