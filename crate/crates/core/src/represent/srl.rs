//! Reduction of externally produced semantic-role parses to normalized
//! predicate-argument strings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Lemmatizer, RepresentError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub text: String,
    /// First token index.
    pub start: usize,
    /// One past the last token index.
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlArgument {
    pub role: String,
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub head_pos: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlParse {
    pub sentence_id: String,
    pub predicate: TokenSpan,
    pub args: Vec<SrlArgument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
}

impl SrlParse {
    fn validate(&self) -> Result<(), RepresentError> {
        if self.predicate.end <= self.predicate.start || self.predicate.text.trim().is_empty() {
            return Err(RepresentError::EmptyPredicate { sentence_id: self.sentence_id.clone() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedString {
    pub sentence_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reduction {
    Kept(ReducedString),
    Discard,
}

/// Head tags (Universal Dependencies or Penn Treebank) counted as nominal.
pub fn is_nominal(head_pos: &str) -> bool {
    matches!(
        head_pos.to_ascii_uppercase().as_str(),
        "NOUN" | "PROPN" | "PRON" | "NN" | "NNS" | "NNP" | "NNPS" | "PRP"
    )
}

/// Head tags counted as adverbial or adjectival.
pub fn is_modifier(head_pos: &str) -> bool {
    matches!(
        head_pos.to_ascii_uppercase().as_str(),
        "ADV" | "ADJ" | "RB" | "RBR" | "RBS" | "JJ" | "JJR" | "JJS" | "WRB"
    )
}

/// Subject/object roles: `ARG0` and `ARG1`, including their `R-`/`C-` variants.
pub fn is_subject_or_object(role: &str) -> bool {
    let core = role.trim_start_matches("R-").trim_start_matches("C-");
    matches!(core, "ARG0" | "ARG1")
}

/// Reduces one parse to `(arg, pred, arg, ...)`.
///
/// Parses with no nominal-headed subject or object are discarded. Arguments
/// with adverbial or adjectival heads are dropped; the remaining arguments
/// and the predicate are rendered in token order, lemmatized and lowercased.
pub fn reduce_parse(parse: &SrlParse, lemmatizer: &Lemmatizer) -> Reduction {
    let has_nominal_core = parse
        .args
        .iter()
        .any(|a| is_subject_or_object(&a.role) && is_nominal(&a.head_pos));
    if !has_nominal_core {
        return Reduction::Discard;
    }
    let mut pieces: Vec<(usize, String)> = parse
        .args
        .iter()
        .filter(|a| !is_modifier(&a.head_pos))
        .map(|a| (a.start, lemmatizer.lemmatize_phrase(&a.text)))
        .collect();
    pieces.push((parse.predicate.start, lemmatizer.lemmatize_phrase(&parse.predicate.text)));
    pieces.sort_by_key(|(start, _)| *start);
    let rendered: Vec<String> = pieces.into_iter().map(|(_, s)| s).filter(|s| !s.is_empty()).collect();
    Reduction::Kept(ReducedString {
        sentence_id: parse.sentence_id.clone(),
        text: format!("({})", rendered.join(", ")),
    })
}

const NEED_WANT: &[&str] = &["need", "needs", "needed", "needing", "want", "wants", "wanted", "wanting"];

/// Resolves need/want + to-infinitive constructions within one sentence.
///
/// When a `need`/`want` parse has an argument beginning with `to` whose
/// second token heads another parse, that embedded parse is removed and the
/// complement argument of the kept parse is replaced by the embedded parse's
/// arguments that follow its predicate inside the complement.
pub fn filter_infinitive_complements(parses: Vec<SrlParse>) -> Vec<SrlParse> {
    let mut removed = vec![false; parses.len()];
    let mut rewritten: BTreeMap<usize, SrlParse> = BTreeMap::new();
    for (i, parse) in parses.iter().enumerate() {
        if removed[i] || !NEED_WANT.contains(&parse.predicate.text.trim().to_lowercase().as_str()) {
            continue;
        }
        let mut new_args = Vec::with_capacity(parse.args.len());
        let mut changed = false;
        for arg in &parse.args {
            let starts_with_to = arg.text.split_whitespace().next().is_some_and(|w| w.eq_ignore_ascii_case("to"));
            let embedded = starts_with_to
                .then(|| {
                    parses.iter().enumerate().find(|(j, other)| {
                        *j != i
                            && other.sentence_id == parse.sentence_id
                            && other.predicate.start == arg.start + 1
                            && other.predicate.end <= arg.end
                    })
                })
                .flatten();
            match embedded {
                Some((j, inner)) => {
                    removed[j] = true;
                    changed = true;
                    let complement: Vec<SrlArgument> = inner
                        .args
                        .iter()
                        .filter(|a| a.start >= inner.predicate.end && a.end <= arg.end)
                        .cloned()
                        .collect();
                    if complement.is_empty() {
                        new_args.push(arg.clone());
                    } else {
                        new_args.extend(complement);
                    }
                }
                None => new_args.push(arg.clone()),
            }
        }
        if changed {
            rewritten.insert(i, SrlParse { args: new_args, ..parse.clone() });
        }
    }
    parses
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !removed[*i])
        .map(|(i, p)| rewritten.remove(&i).unwrap_or(p))
        .collect()
}

/// Applies the infinitive filter and reduction to all parses of one sentence.
pub fn reduce_sentence(parses: Vec<SrlParse>, lemmatizer: &Lemmatizer) -> Vec<ReducedString> {
    filter_infinitive_complements(parses)
        .iter()
        .filter_map(|p| match reduce_parse(p, lemmatizer) {
            Reduction::Kept(r) => Some(r),
            Reduction::Discard => None,
        })
        .collect()
}

/// Reads an SRL annotation file (one parse per JSONL line).
pub fn load_srl(path: &Path) -> Result<Vec<SrlParse>, RepresentError> {
    let text = std::fs::read_to_string(path).map_err(|source| RepresentError::Io { path: path.to_path_buf(), source })?;
    let mut parses = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse: SrlParse = serde_json::from_str(line)
            .map_err(|e| RepresentError::Malformed { line: idx + 1, reason: e.to_string() })?;
        parse.validate()?;
        parses.push(parse);
    }
    Ok(parses)
}
