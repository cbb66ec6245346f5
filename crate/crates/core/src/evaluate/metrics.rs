use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::predict::Prediction;
use super::EvaluateError;

/// Column for predictions outside the displayed tags, abstentions included.
pub const OTHER: &str = "other";

fn check(predicted: &[Prediction], gold: &[String]) -> Result<(), EvaluateError> {
    if gold.is_empty() {
        return Err(EvaluateError::EmptyTestSet);
    }
    if predicted.len() != gold.len() {
        return Err(EvaluateError::Misaligned { predictions: predicted.len(), golds: gold.len() });
    }
    Ok(())
}

/// Micro-averaged F1 over single-label data. An abstention is a wrong
/// prediction, so precision, recall and F1 all equal accuracy.
pub fn micro_f1(predicted: &[Prediction], gold: &[String]) -> Result<f64, EvaluateError> {
    check(predicted, gold)?;
    let correct = predicted.iter().zip(gold).filter(|(p, g)| p.tag() == Some(g.as_str())).count();
    let tp = correct as f64;
    let fp = (predicted.len() - correct) as f64;
    let fn_ = fp;
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    Ok(if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagMetrics {
    pub tag: String,
    /// Gold count.
    pub support: usize,
    pub predicted: usize,
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One-vs-rest metrics for every tag that occurs as gold or prediction,
/// sorted by tag. Undefined ratios are reported as 0.
pub fn per_tag_metrics(predicted: &[Prediction], gold: &[String]) -> Result<Vec<TagMetrics>, EvaluateError> {
    check(predicted, gold)?;
    let mut tags: BTreeSet<&str> = gold.iter().map(String::as_str).collect();
    tags.extend(predicted.iter().filter_map(Prediction::tag));
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(tags
        .into_iter()
        .map(|tag| {
            let support = gold.iter().filter(|g| *g == tag).count();
            let n_pred = predicted.iter().filter(|p| p.tag() == Some(tag)).count();
            let tp = predicted.iter().zip(gold).filter(|(p, g)| p.tag() == Some(tag) && *g == tag).count();
            let precision = ratio(tp, n_pred);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            TagMetrics { tag: tag.to_string(), support, predicted: n_pred, true_positives: tp, precision, recall, f1 }
        })
        .collect())
}

/// Gold tags (rows) against predicted tags (columns, plus [`OTHER`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Row labels: the `top_m` most frequent gold tags, ties by name.
    pub tags: Vec<String>,
    /// `cells[r][c]`; the last column is [`OTHER`].
    pub cells: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn columns(&self) -> Vec<&str> {
        self.tags.iter().map(String::as_str).chain([OTHER]).collect()
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold");
        for c in self.columns() {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (tag, row) in self.tags.iter().zip(&self.cells) {
            out.push_str(&csv_field(tag));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text table.
    pub fn render(&self) -> String {
        let cols = self.columns();
        let label_w = self.tags.iter().map(|t| t.len()).chain([4]).max().unwrap_or(4);
        let widths: Vec<usize> = cols
            .iter()
            .enumerate()
            .map(|(c, name)| self.cells.iter().map(|r| r[c].to_string().len()).chain([name.len()]).max().unwrap_or(1))
            .collect();
        let mut out = format!("{:<label_w$}", "gold");
        for (name, w) in cols.iter().zip(&widths) {
            out.push_str(&format!("  {name:>w$}"));
        }
        out.push('\n');
        for (tag, row) in self.tags.iter().zip(&self.cells) {
            out.push_str(&format!("{tag:<label_w$}"));
            for (v, w) in row.iter().zip(&widths) {
                out.push_str(&format!("  {v:>w$}"));
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Questions whose gold tag is outside the `top_m` rows are not counted.
pub fn confusion_matrix(predicted: &[Prediction], gold: &[String], top_m: usize) -> Result<ConfusionMatrix, EvaluateError> {
    if top_m == 0 {
        return Err(EvaluateError::InvalidTopM);
    }
    check(predicted, gold)?;
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    gold.iter().for_each(|g| *freq.entry(g).or_default() += 1);
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tags: Vec<String> = ranked.into_iter().take(top_m).map(|(t, _)| t.to_string()).collect();
    let position = |t: &str| tags.iter().position(|x| x == t);
    let mut cells = vec![vec![0; tags.len() + 1]; tags.len()];
    for (p, g) in predicted.iter().zip(gold) {
        let Some(row) = position(g) else { continue };
        let col = p.tag().and_then(position).unwrap_or(tags.len());
        cells[row][col] += 1;
    }
    Ok(ConfusionMatrix { tags, cells })
}
