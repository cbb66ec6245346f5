//! Tagged question corpus: ingestion, tag selection, the train/test split and
//! the max-N sentence datasets.

mod html;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::represent::Segmenter;

pub use html::strip_markup;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate question id `{0}`")]
    DuplicateId(String),
    #[error("no tags meet support (min_support = {0})")]
    NoTagsMeetSupport(usize),
    #[error("min_support must be at least 1")]
    InvalidSupport,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("{0} split is empty after tag filtering")]
    EmptySplit(&'static str),
    #[error("max_n must be at least 1")]
    InvalidMaxN,
}

/// A tagged question, the unit of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub body: String,
    pub tags: BTreeSet<String>,
    pub created_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" | "json" => Some(Self::Jsonl),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown corpus format `{other}` (expected jsonl or csv)")),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Jsonl => "jsonl",
            Self::Csv => "csv",
        })
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    body: String,
    tags: Vec<String>,
    created_at: String,
}

#[derive(Deserialize)]
struct CsvRecord {
    id: String,
    body: String,
    tags: String,
    created_at: String,
}

/// Loads every question in `path`. Bodies are kept verbatim.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Question>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let reader = BufReader::new(file);
    match format {
        CorpusFormat::Jsonl => read_jsonl(reader, path),
        CorpusFormat::Csv => read_csv(reader),
    }
}

fn read_jsonl(reader: impl BufRead, path: &Path) -> Result<Vec<Question>, CorpusError> {
    let mut questions = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: line_no, reason: e.to_string() })?;
        let question = build_question(record.id, record.body, record.tags, record.created_at, line_no)?;
        push_unique(&mut questions, &mut seen, question)?;
    }
    Ok(questions)
}

fn read_csv(reader: impl std::io::Read) -> Result<Vec<Question>, CorpusError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut questions = Vec::new();
    let mut seen = HashSet::new();
    let malformed = |e: csv::Error, fallback: usize| {
        let line = e.position().map_or(fallback, |p| p.line() as usize);
        CorpusError::Malformed { line, reason: e.to_string() }
    };
    let headers = csv_reader.headers().map_err(|e| malformed(e, 1))?.clone();
    let mut row = csv::StringRecord::new();
    while csv_reader.read_record(&mut row).map_err(|e| malformed(e, 0))? {
        let line = row.position().map_or(0, |p| p.line() as usize);
        let record: CsvRecord = row.deserialize(Some(&headers)).map_err(|e| malformed(e, line))?;
        let tags = record.tags.split('|').map(str::to_string).collect();
        let question = build_question(record.id, record.body, tags, record.created_at, line)?;
        push_unique(&mut questions, &mut seen, question)?;
    }
    Ok(questions)
}

fn build_question(
    id: String,
    body: String,
    tags: Vec<String>,
    created_at: String,
    line: usize,
) -> Result<Question, CorpusError> {
    let malformed = |reason: &str| CorpusError::Malformed { line, reason: reason.to_string() };
    if id.trim().is_empty() {
        return Err(malformed("empty `id`"));
    }
    let tags: BTreeSet<String> = tags
        .into_iter()
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect();
    if tags.is_empty() {
        return Err(malformed("`tags` must contain at least one tag"));
    }
    if !is_iso8601(&created_at) {
        return Err(CorpusError::Malformed {
            line,
            reason: format!("`created_at` is not an ISO-8601 timestamp: `{created_at}`"),
        });
    }
    Ok(Question { id, body, tags, created_at })
}

fn is_iso8601(s: &str) -> bool {
    chrono::DateTime::parse_from_rfc3339(s).is_ok()
        || chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").is_ok()
        || chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok()
}

fn push_unique(
    questions: &mut Vec<Question>,
    seen: &mut HashSet<String>,
    question: Question,
) -> Result<(), CorpusError> {
    if !seen.insert(question.id.clone()) {
        return Err(CorpusError::DuplicateId(question.id));
    }
    questions.push(question);
    Ok(())
}

/// Tags retained for the experiment, most frequent first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    pub tags: Vec<String>,
    /// Number of questions carrying each tag, aligned with `tags`.
    pub support: Vec<usize>,
    pub min_support: usize,
}

impl TagSet {
    pub fn contains(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Keeps the questions with at least one selected tag, dropping the
    /// unselected tags from each.
    pub fn restrict(&self, questions: &[Question]) -> Vec<Question> {
        questions
            .iter()
            .filter_map(|q| {
                let tags: BTreeSet<String> = q.tags.iter().filter(|t| self.contains(t)).cloned().collect();
                (!tags.is_empty()).then(|| Question { tags, ..q.clone() })
            })
            .collect()
    }
}

/// Tags carried by at least `min_support` questions, optionally intersected
/// with an allowlist. Ordered by descending support, then by name.
pub fn select_tags(
    corpus: &[Question],
    min_support: usize,
    allowlist: Option<&[String]>,
) -> Result<TagSet, CorpusError> {
    if min_support == 0 {
        return Err(CorpusError::InvalidSupport);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for q in corpus {
        for tag in &q.tags {
            *counts.entry(tag.as_str()).or_default() += 1;
        }
    }
    let allow: Option<HashSet<&str>> = allowlist.map(|a| a.iter().map(String::as_str).collect());
    let mut selected: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(tag, n)| n >= min_support && allow.as_ref().is_none_or(|a| a.contains(tag)))
        .collect();
    if selected.is_empty() {
        return Err(CorpusError::NoTagsMeetSupport(min_support));
    }
    selected.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(TagSet {
        tags: selected.iter().map(|(t, _)| t.to_string()).collect(),
        support: selected.iter().map(|&(_, n)| n).collect(),
        min_support,
    })
}

/// Reads a newline-separated tag allowlist; blank lines and `#` comments are ignored.
pub fn load_allowlist(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCorpus {
    pub train: Vec<Question>,
    pub test: Vec<Question>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub id: String,
    pub split: Split,
}

impl SplitCorpus {
    /// `{id, split}` records for every retained question, sorted by id.
    pub fn manifest(&self) -> Vec<SplitRecord> {
        let mut records: Vec<SplitRecord> = self
            .train
            .iter()
            .map(|q| SplitRecord { id: q.id.clone(), split: Split::Train })
            .chain(self.test.iter().map(|q| SplitRecord { id: q.id.clone(), split: Split::Test }))
            .collect();
        records.sort_by(|a, b| a.id.cmp(&b.id));
        records
    }

    pub fn write_manifest(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        for record in self.manifest() {
            let line = serde_json::to_string(&record).expect("split record serializes");
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Seeded train/test split followed by tag filtering.
///
/// Question ids are sorted, shuffled with a ChaCha8 stream seeded by `seed`,
/// and the first `ceil(ratio * N)` become training candidates. Training
/// questions keep only their selected tags (and are dropped if none remain);
/// test questions are kept only when they carry exactly one tag and that tag
/// is selected.
pub fn split_train_test(
    corpus: &[Question],
    tagset: &TagSet,
    ratio: f64,
    seed: u64,
) -> Result<SplitCorpus, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    let mut order: Vec<&Question> = corpus.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = ((ratio * order.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let (train_part, test_part) = order.split_at(n_train.min(order.len()));

    let mut train: Vec<Question> = train_part
        .iter()
        .filter_map(|q| {
            let tags: BTreeSet<String> = q.tags.iter().filter(|t| tagset.contains(t)).cloned().collect();
            (!tags.is_empty()).then(|| Question { tags, ..(*q).clone() })
        })
        .collect();
    let mut test: Vec<Question> = test_part
        .iter()
        .filter(|q| q.tags.len() == 1 && q.tags.iter().all(|t| tagset.contains(t)))
        .map(|q| (*q).clone())
        .collect();
    if train.is_empty() {
        return Err(CorpusError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(CorpusError::EmptySplit("test"));
    }
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(SplitCorpus { train, test, seed })
}

/// One extracted sentence (or reduced parse string) with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceUnit {
    pub sentence_id: String,
    pub question_id: String,
    pub position: usize,
    pub text: String,
    pub tags: BTreeSet<String>,
}

pub fn sentence_id(question_id: &str, position: usize) -> String {
    format!("{question_id}#{position}")
}

/// The first `min(max_n, sentence count)` sentences of every question, in
/// question order. Questions whose body yields no sentence are skipped.
pub fn extract_sentence_units(
    questions: &[Question],
    segmenter: &(dyn Segmenter + Sync),
    max_n: usize,
) -> Result<Vec<SentenceUnit>, CorpusError> {
    if max_n == 0 {
        return Err(CorpusError::InvalidMaxN);
    }
    let per_question: Vec<Vec<SentenceUnit>> = questions
        .par_iter()
        .map(|q| {
            let sentences = segmenter.segment(&strip_markup(&q.body));
            if sentences.is_empty() {
                tracing::warn!(question_id = %q.id, "question body has no sentences; skipped");
            }
            sentences
                .into_iter()
                .take(max_n)
                .enumerate()
                .map(|(position, text)| SentenceUnit {
                    sentence_id: sentence_id(&q.id, position),
                    question_id: q.id.clone(),
                    position,
                    text,
                    tags: q.tags.clone(),
                })
                .collect()
        })
        .collect();
    Ok(per_question.into_iter().flatten().collect())
}

/// Groups units by question, preserving first-seen question order.
pub fn group_by_question(units: &[SentenceUnit]) -> Vec<(&str, Vec<&SentenceUnit>)> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(&str, Vec<&SentenceUnit>)> = Vec::new();
    for unit in units {
        let slot = *index.entry(unit.question_id.as_str()).or_insert_with(|| {
            groups.push((unit.question_id.as_str(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(unit);
    }
    groups
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| io_err(e.into()))?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_jsonl_items<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line)
                .map_err(|e| CorpusError::Malformed { line: idx + 1, reason: e.to_string() })?,
        );
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::represent::RuleSegmenter;
    use std::io::Cursor;

    fn q(id: &str, body: &str, tags: &[&str]) -> Question {
        Question {
            id: id.into(),
            body: body.into(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
            created_at: "2020-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn jsonl_loads_three_records() {
        let data = r#"{"id":"1","body":"A b.","tags":["x"],"created_at":"2009-10-06T18:56:10.123"}
{"id":"2","body":"<p>C</p>","tags":["x","y"],"created_at":"2021-02-27T00:00:00Z"}

{"id":"3","body":"  spaced  ","tags":["z"],"created_at":"2015-05-05"}
"#;
        let qs = read_jsonl(Cursor::new(data), Path::new("mem")).unwrap();
        assert_eq!(qs.len(), 3);
        assert_eq!(qs[1].body, "<p>C</p>");
        assert_eq!(qs[2].body, "  spaced  ");
    }

    #[test]
    fn jsonl_missing_tags_names_line() {
        let data = "{\"id\":\"1\",\"body\":\"a\",\"tags\":[\"x\"],\"created_at\":\"2020-01-01\"}\n{\"id\":\"2\",\"body\":\"b\",\"created_at\":\"2020-01-01\"}\n";
        match read_jsonl(Cursor::new(data), Path::new("mem")) {
            Err(CorpusError::Malformed { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("tags"), "{reason}");
            }
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_rejects_empty_tags_and_bad_timestamp() {
        let empty = "{\"id\":\"1\",\"body\":\"a\",\"tags\":[],\"created_at\":\"2020-01-01\"}\n";
        assert!(matches!(read_jsonl(Cursor::new(empty), Path::new("m")), Err(CorpusError::Malformed { line: 1, .. })));
        let bad_ts = "{\"id\":\"1\",\"body\":\"a\",\"tags\":[\"x\"],\"created_at\":\"yesterday\"}\n";
        assert!(matches!(read_jsonl(Cursor::new(bad_ts), Path::new("m")), Err(CorpusError::Malformed { line: 1, .. })));
    }

    #[test]
    fn duplicate_id_is_named() {
        let data = "{\"id\":\"dup\",\"body\":\"a\",\"tags\":[\"x\"],\"created_at\":\"2020-01-01\"}\n{\"id\":\"dup\",\"body\":\"b\",\"tags\":[\"x\"],\"created_at\":\"2020-01-01\"}\n";
        match read_jsonl(Cursor::new(data), Path::new("m")) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "dup"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_with_pipe_tags() {
        let data = "id,body,tags,created_at\n1,\"Hello, world.\",a|b,2020-01-01T00:00:00Z\n2,Bye.,c,2020-01-02T00:00:00Z\n";
        let qs = read_csv(Cursor::new(data)).unwrap();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].body, "Hello, world.");
        assert_eq!(qs[0].tags, ["a", "b"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn csv_missing_column_is_malformed() {
        let data = "id,body,created_at\n1,x,2020-01-01\n";
        assert!(matches!(read_csv(Cursor::new(data)), Err(CorpusError::Malformed { .. })));
    }

    #[test]
    fn select_tags_support_boundary() {
        let mut corpus = Vec::new();
        for i in 0..50 {
            corpus.push(q(&format!("a{i}"), "x", &["a"]));
        }
        for i in 0..49 {
            corpus.push(q(&format!("b{i}"), "x", &["b"]));
        }
        let ts = select_tags(&corpus, 50, None).unwrap();
        assert_eq!(ts.tags, vec!["a"]);
        assert_eq!(ts.support, vec![50]);
    }

    #[test]
    fn select_tags_orders_by_frequency_then_name() {
        let mut corpus = Vec::new();
        for (tag, n) in [("c", 100), ("a", 100), ("b", 100), ("d", 120)] {
            for i in 0..n {
                corpus.push(q(&format!("{tag}{i}"), "x", &[tag]));
            }
        }
        let ts = select_tags(&corpus, 1, None).unwrap();
        assert_eq!(ts.tags, vec!["d", "a", "b", "c"]);
        let allow = vec!["c".to_string(), "a".to_string(), "zzz".to_string()];
        let ts = select_tags(&corpus, 1, Some(&allow)).unwrap();
        assert_eq!(ts.tags, vec!["a", "c"]);
    }

    #[test]
    fn select_tags_errors() {
        let corpus = vec![q("1", "x", &["a"])];
        assert!(matches!(select_tags(&corpus, 0, None), Err(CorpusError::InvalidSupport)));
        let err = select_tags(&corpus, 2, None).unwrap_err();
        assert!(err.to_string().contains("no tags meet support"));
    }

    #[test]
    fn split_exact_ratio_and_determinism() {
        let corpus: Vec<Question> = (0..10).map(|i| q(&format!("q{i}"), "x", &["a"])).collect();
        let ts = select_tags(&corpus, 1, None).unwrap();
        let s1 = split_train_test(&corpus, &ts, 0.8, 42).unwrap();
        assert_eq!((s1.train.len(), s1.test.len()), (8, 2));
        let s2 = split_train_test(&corpus, &ts, 0.8, 42).unwrap();
        assert_eq!(s1, s2);
        let mut reversed = corpus.clone();
        reversed.reverse();
        assert_eq!(split_train_test(&reversed, &ts, 0.8, 42).unwrap(), s1);
    }

    #[test]
    fn split_filters_tags() {
        let mut corpus = Vec::new();
        for i in 0..40 {
            let tags: &[&str] = match i % 4 {
                0 => &["a"],
                1 => &["a", "b"],
                2 => &["zzz"],
                _ => &["b", "zzz"],
            };
            corpus.push(q(&format!("q{i:02}"), "x", tags));
        }
        let allow = vec!["a".to_string(), "b".to_string()];
        let ts = select_tags(&corpus, 1, Some(&allow)).unwrap();
        let split = split_train_test(&corpus, &ts, 0.5, 7).unwrap();
        for q in &split.train {
            assert!(!q.tags.is_empty());
            assert!(q.tags.iter().all(|t| ts.contains(t)));
        }
        for q in &split.test {
            assert_eq!(q.tags.len(), 1);
            assert!(ts.contains(q.tags.iter().next().unwrap()));
        }
        let train_ids: HashSet<_> = split.train.iter().map(|q| &q.id).collect();
        assert!(split.test.iter().all(|q| !train_ids.contains(&q.id)));
    }

    #[test]
    fn split_rejects_bad_ratio_and_empty_sides() {
        let corpus: Vec<Question> = (0..4).map(|i| q(&format!("q{i}"), "x", &["a", "b"])).collect();
        let ts = select_tags(&corpus, 1, None).unwrap();
        assert!(matches!(split_train_test(&corpus, &ts, 1.0, 1), Err(CorpusError::InvalidRatio(_))));
        assert!(matches!(split_train_test(&corpus, &ts, 0.0, 1), Err(CorpusError::InvalidRatio(_))));
        // Every question is multi-tagged, so no test question survives.
        assert!(matches!(split_train_test(&corpus, &ts, 0.5, 1), Err(CorpusError::EmptySplit("test"))));
    }

    #[test]
    fn extraction_truncates_and_skips_empty() {
        let seven = "One here. Two here. Three here. Four here. Five here. Six here. Seven here.";
        let questions = vec![q("long", seven, &["a"]), q("short", "First. Second.", &["b"]), q("empty", "   ", &["a"])];
        let units = extract_sentence_units(&questions, &RuleSegmenter::default(), 5).unwrap();
        let long: Vec<_> = units.iter().filter(|u| u.question_id == "long").collect();
        assert_eq!(long.len(), 5);
        assert_eq!(long[4].text, "Five here.");
        assert_eq!(long[0].sentence_id, "long#0");
        assert_eq!(units.iter().filter(|u| u.question_id == "short").count(), 2);
        assert!(units.iter().all(|u| u.question_id != "empty"));
        assert!(matches!(extract_sentence_units(&questions, &RuleSegmenter::default(), 0), Err(CorpusError::InvalidMaxN)));
    }

    #[test]
    fn select_tags_is_idempotent() {
        let mut corpus = Vec::new();
        for i in 0..30 {
            let tags: &[&str] = match i % 3 {
                0 => &["a", "rare"],
                1 => &["a", "b"],
                _ => &["b"],
            };
            corpus.push(q(&format!("q{i}"), "x", tags));
        }
        corpus.push(q("r", "x", &["rare2"]));
        let ts = select_tags(&corpus, 5, None).unwrap();
        let again = select_tags(&ts.restrict(&corpus), 5, None).unwrap();
        assert_eq!(ts, again);
    }
}
