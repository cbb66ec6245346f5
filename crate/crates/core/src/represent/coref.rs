use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RepresentError;
use crate::corpus::sentence_id;

/// Pronouns rewritten to their antecedent. The plural forms are rewritten
/// only when the antecedent is non-human.
const NON_PERSONAL: &[&str] = &["it", "its", "this", "that", "these", "those", "they", "them", "their"];
const PLURAL: &[&str] = &["they", "them", "their"];

/// A coreference mention. `start`/`end` are character offsets into the
/// sentence at `sentence_index` (end exclusive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
    #[serde(default)]
    pub is_antecedent: bool,
    #[serde(default)]
    pub is_human: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorefChain {
    pub mentions: Vec<Mention>,
}

impl CorefChain {
    /// The marked antecedent, or failing that the earliest non-pronominal mention.
    pub fn antecedent(&self) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.is_antecedent).or_else(|| {
            self.mentions
                .iter()
                .filter(|m| !is_pronoun(&m.text))
                .min_by_key(|m| (m.sentence_index, m.start))
        })
    }
}

/// One line of the coreference annotation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefDocument {
    pub question_id: String,
    pub chains: Vec<CorefChain>,
}

fn is_pronoun(text: &str) -> bool {
    let lower = text.trim().to_lowercase();
    NON_PERSONAL.contains(&lower.as_str())
        || matches!(lower.as_str(), "i" | "me" | "my" | "you" | "your" | "we" | "us" | "our" | "he" | "him" | "his" | "she" | "her")
}

/// Replaces non-personal pronoun mentions with their antecedent's text.
///
/// Spans beyond a sentence are an error. A span whose text no longer matches
/// the mention (for example because it was already rewritten) is left alone,
/// which makes the operation idempotent.
pub fn resolve_pronouns(
    question_id: &str,
    sentences: &[String],
    chains: &[CorefChain],
) -> Result<Vec<String>, RepresentError> {
    let mut edits: Vec<Vec<(usize, usize, &str)>> = vec![Vec::new(); sentences.len()];
    for chain in chains {
        let Some(antecedent) = chain.antecedent() else { continue };
        for mention in &chain.mentions {
            let sid = || sentence_id(question_id, mention.sentence_index);
            let sentence = sentences.get(mention.sentence_index).ok_or_else(|| RepresentError::SpanOutOfRange {
                sentence_id: sid(),
                start: mention.start,
                end: mention.end,
                len: 0,
            })?;
            let len = sentence.chars().count();
            if mention.start >= mention.end || mention.end > len {
                return Err(RepresentError::SpanOutOfRange {
                    sentence_id: sid(),
                    start: mention.start,
                    end: mention.end,
                    len,
                });
            }
            if std::ptr::eq(mention, antecedent) {
                continue;
            }
            let lower = mention.text.trim().to_lowercase();
            if !NON_PERSONAL.contains(&lower.as_str()) || (PLURAL.contains(&lower.as_str()) && antecedent.is_human) {
                continue;
            }
            let current: String = sentence.chars().skip(mention.start).take(mention.end - mention.start).collect();
            if !current.eq_ignore_ascii_case(mention.text.trim()) {
                continue;
            }
            edits[mention.sentence_index].push((mention.start, mention.end, antecedent.text.as_str()));
        }
    }
    Ok(sentences
        .iter()
        .zip(edits)
        .map(|(sentence, mut edits)| {
            if edits.is_empty() {
                return sentence.clone();
            }
            edits.sort_by_key(|e| std::cmp::Reverse(e.0));
            let mut chars: Vec<char> = sentence.chars().collect();
            let mut floor = usize::MAX;
            for (start, end, replacement) in edits {
                if end > floor {
                    continue;
                }
                chars.splice(start..end, replacement.chars());
                floor = start;
            }
            chars.into_iter().collect()
        })
        .collect())
}

pub fn load_coref(path: &Path) -> Result<Vec<CorefDocument>, RepresentError> {
    let text = std::fs::read_to_string(path).map_err(|source| RepresentError::Io { path: path.to_path_buf(), source })?;
    let mut docs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        docs.push(
            serde_json::from_str(line).map_err(|e| RepresentError::Malformed { line: idx + 1, reason: e.to_string() })?,
        );
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mention(sentence_index: usize, start: usize, text: &str, is_antecedent: bool) -> Mention {
        Mention {
            sentence_index,
            start,
            end: start + text.chars().count(),
            text: text.into(),
            is_antecedent,
            is_human: false,
        }
    }

    fn sentences(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn card_it_chain() {
        let s = sentences(&["I'm calling about my card", "it's not working"]);
        let chain = CorefChain { mentions: vec![mention(0, 18, "my card", true), mention(1, 0, "it", false)] };
        let out = resolve_pronouns("q1", &s, std::slice::from_ref(&chain)).unwrap();
        assert_eq!(out, sentences(&["I'm calling about my card", "my card's not working"]));
        // Idempotent.
        assert_eq!(resolve_pronouns("q1", &out, &[chain]).unwrap(), out);
    }

    #[test]
    fn no_chains_is_identity() {
        let s = sentences(&["I lost it"]);
        assert_eq!(resolve_pronouns("q", &s, &[]).unwrap(), s);
    }

    #[test]
    fn personal_pronouns_untouched() {
        let s = sentences(&["My sister has a loan", "She pays it monthly"]);
        let sister = CorefChain {
            mentions: vec![
                Mention { is_human: true, ..mention(0, 0, "My sister", true) },
                Mention { is_human: true, ..mention(1, 0, "She", false) },
            ],
        };
        let loan = CorefChain { mentions: vec![mention(0, 14, "a loan", true), mention(1, 9, "it", false)] };
        let out = resolve_pronouns("q", &s, &[sister, loan]).unwrap();
        assert_eq!(out[1], "She pays a loan monthly");
    }

    #[test]
    fn human_plural_antecedent_kept() {
        let s = sentences(&["My parents own stocks", "They sold them"]);
        let parents = CorefChain {
            mentions: vec![
                Mention { is_human: true, ..mention(0, 0, "My parents", true) },
                Mention { is_human: true, ..mention(1, 0, "They", false) },
            ],
        };
        let stocks = CorefChain { mentions: vec![mention(0, 15, "stocks", true), mention(1, 10, "them", false)] };
        let out = resolve_pronouns("q", &s, &[parents, stocks]).unwrap();
        assert_eq!(out[1], "They sold stocks");
    }

    #[test]
    fn out_of_range_names_sentence() {
        let s = sentences(&["short"]);
        let chain = CorefChain { mentions: vec![mention(0, 0, "short", true), mention(3, 0, "it", false)] };
        match resolve_pronouns("q9", &s, &[chain]) {
            Err(RepresentError::SpanOutOfRange { sentence_id, .. }) => assert_eq!(sentence_id, "q9#3"),
            other => panic!("{other:?}"),
        }
        let chain = CorefChain { mentions: vec![mention(0, 0, "short", true), Mention { end: 40, ..mention(0, 2, "it", false) }] };
        assert!(matches!(resolve_pronouns("q9", &s, &[chain]), Err(RepresentError::SpanOutOfRange { .. })));
    }

    #[test]
    fn antecedent_falls_back_to_first_nominal() {
        let chain = CorefChain { mentions: vec![mention(1, 0, "it", false), mention(0, 4, "the fee", false)] };
        assert_eq!(chain.antecedent().unwrap().text, "the fee");
    }
}
