//! Seeded synthetic corpora with known structure, for tests and demos.
//!
//! Every question has a single tag. Topic sentences mix words owned by that
//! tag alone with function words shared by all tags; filler sentences come
//! from a pool shared by all tags and carry no topic signal.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Question;

struct Topic {
    tag: &'static str,
    nouns: &'static [&'static str],
    verbs: &'static [&'static str],
    adjectives: &'static [&'static str],
}

const TOPICS: &[Topic] = &[
    Topic {
        tag: "mortgage",
        nouns: &["mortgage", "lender", "escrow", "downpayment", "refinance", "appraisal"],
        verbs: &["refinance", "prepay", "appraise"],
        adjectives: &["fixed", "adjustable"],
    },
    Topic {
        tag: "investing",
        nouns: &["portfolio", "dividend", "stock", "index", "etf", "brokerage"],
        verbs: &["invest", "rebalance", "diversify"],
        adjectives: &["volatile", "diversified"],
    },
    Topic {
        tag: "taxes",
        nouns: &["irs", "deduction", "refund", "withholding", "bracket", "audit"],
        verbs: &["deduct", "file", "itemize"],
        adjectives: &["taxable", "deductible"],
    },
    Topic {
        tag: "credit-card",
        nouns: &["card", "apr", "statement", "cashback", "issuer", "limit"],
        verbs: &["charge", "swipe", "dispute"],
        adjectives: &["declined", "contactless"],
    },
    Topic {
        tag: "retirement",
        nouns: &["401k", "ira", "pension", "annuity", "rollover", "retiree"],
        verbs: &["retire", "vest", "roll"],
        adjectives: &["traditional", "early"],
    },
];

/// Function words shared by every topic.
const STOPWORDS: &[&str] = &["the", "my", "a", "and", "to", "is", "for", "i", "should", "with", "on", "of"];

const FILLER: &[&str] = &[
    "Thanks in advance for any help.",
    "I am new to all of this.",
    "Any advice would be appreciated.",
    "I have been thinking about it for weeks.",
    "My spouse and I disagree on what to do.",
    "Sorry if this is a basic question.",
    "We live in a small town.",
    "I could not find a clear answer anywhere.",
];

/// Tags of the separability corpus, in generation order.
pub fn separability_tags() -> Vec<&'static str> {
    TOPICS.iter().map(|t| t.tag).collect()
}

/// Four to seven tokens, each a topic word with probability 0.6 and a
/// shared stopword otherwise. At least one token is a topic word.
fn topic_sentence(topic: &Topic, rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(4..=7);
    let mut words: Vec<&str> = Vec::with_capacity(len);
    for i in 0..len {
        let word = if i == 0 || rng.random_bool(0.6) {
            let pool = match rng.random_range(0..4) {
                0 => topic.verbs,
                1 => topic.adjectives,
                _ => topic.nouns,
            };
            *pool.choose(rng).expect("topic words")
        } else {
            *STOPWORDS.choose(rng).expect("stopwords")
        };
        words.push(word);
    }
    words.shuffle(rng);
    let sentence = words.join(" ");
    let mut chars = sentence.chars();
    let first: String = chars.next().map(|c| c.to_uppercase().collect()).unwrap_or_default();
    let end = if rng.random_bool(0.5) { '?' } else { '.' };
    format!("{first}{}{end}", chars.as_str())
}

/// `per_tag` single-tag questions for each of the five topics. Each question
/// has one to three topic sentences and up to two filler sentences in a
/// random order. Ids are `q0000`, `q0001`, ... interleaved across tags.
pub fn separability_corpus(per_tag: usize, seed: u64) -> Vec<Question> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_tag * TOPICS.len());
    for i in 0..per_tag {
        for topic in TOPICS {
            let mut sentences: Vec<String> = (0..rng.random_range(1..=3)).map(|_| topic_sentence(topic, &mut rng)).collect();
            for _ in 0..rng.random_range(0..=2) {
                let at = rng.random_range(0..=sentences.len());
                sentences.insert(at, FILLER.choose(&mut rng).expect("filler").to_string());
            }
            out.push(Question {
                id: format!("q{:04}", out.len()),
                body: sentences.join(" "),
                tags: BTreeSet::from([topic.tag.to_string()]),
                created_at: format!("2020-01-{:02}T12:00:00Z", 1 + i % 28),
            });
        }
    }
    out
}
