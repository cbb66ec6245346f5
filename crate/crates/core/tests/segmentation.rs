use serde::Deserialize;
use theme_core::represent::{RuleSegmenter, Segmenter};

#[derive(Deserialize)]
struct Case {
    text: String,
    sentences: Vec<String>,
}

fn cases() -> Vec<Case> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/segmentation.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn hand_labeled_fixture() {
    let cases = cases();
    assert_eq!(cases.iter().map(|c| c.sentences.len()).sum::<usize>(), 50);
    let seg = RuleSegmenter::default();
    let wrong: Vec<_> = cases
        .iter()
        .filter_map(|c| {
            let got = seg.segment(&c.text);
            (got != c.sentences).then(|| format!("{:?}\n  expected {:?}\n  got      {:?}", c.text, c.sentences, got))
        })
        .collect();
    assert!(wrong.is_empty(), "{}", wrong.join("\n"));
}

#[test]
fn extra_abbreviations_suppress_boundaries() {
    let seg = RuleSegmenter::default();
    assert_eq!(seg.segment("Ask Acct. Services. They know.").len(), 3);
    let seg = RuleSegmenter::default().with_abbreviations(["Acct".to_string()]);
    assert_eq!(seg.segment("Ask Acct. Services. They know."), ["Ask Acct. Services.", "They know."]);
}
