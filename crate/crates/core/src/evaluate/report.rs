use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion_matrix, micro_f1, per_tag_metrics, ConfusionMatrix, TagMetrics};
use super::predict::{CentroidIndex, Prediction, QuestionPrediction, TagDistribution};
use super::EvaluateError;
use crate::cluster::ClusterModel;
use crate::encode::VectorSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub question_id: String,
    pub gold: String,
    /// `None` when the question abstained.
    pub predicted: Option<String>,
    pub correct: bool,
    pub score: f64,
    /// The winning score as an exact fraction, e.g. `11/20`.
    pub score_exact: String,
    pub clusters: Vec<usize>,
    pub skipped: usize,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_f1: f64,
    pub questions: usize,
    pub correct: usize,
    pub abstained: usize,
    pub per_tag: Vec<TagMetrics>,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<PredictionRecord>,
}

/// Scores predictions against gold tags. `gold[i]` belongs to `predictions[i]`.
pub fn build_report(predictions: &[QuestionPrediction], gold: &[String], top_m: usize) -> Result<EvalReport, EvaluateError> {
    let predicted: Vec<Prediction> = predictions.iter().map(|p| p.predicted.clone()).collect();
    let micro = micro_f1(&predicted, gold)?;
    let per_tag = per_tag_metrics(&predicted, gold)?;
    let confusion = confusion_matrix(&predicted, gold, top_m)?;
    let records: Vec<PredictionRecord> = predictions
        .iter()
        .zip(gold)
        .map(|(p, g)| {
            let score = p.score();
            PredictionRecord {
                question_id: p.question_id.clone(),
                gold: g.clone(),
                predicted: p.predicted.tag().map(str::to_string),
                correct: p.predicted.tag() == Some(g.as_str()),
                score: score.to_f64().unwrap_or(0.0),
                score_exact: score.to_string(),
                clusters: p.clusters.clone(),
                skipped: p.skipped,
                scores: p.scores.iter().map(|(t, s)| (t.clone(), s.to_f64().unwrap_or(0.0))).collect(),
            }
        })
        .collect();
    Ok(EvalReport {
        micro_f1: micro,
        questions: records.len(),
        correct: records.iter().filter(|r| r.correct).count(),
        abstained: records.iter().filter(|r| r.predicted.is_none()).count(),
        per_tag,
        confusion,
        predictions: records,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable summary with aligned columns.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Micro-F1   {:.4}", self.micro_f1);
        let _ = writeln!(out, "Questions  {}", self.questions);
        let _ = writeln!(out, "Correct    {}", self.correct);
        let _ = writeln!(out, "Abstained  {}", self.abstained);
        out.push('\n');
        let w = self.per_tag.iter().map(|m| m.tag.len()).chain([3]).max().unwrap_or(3);
        let _ = writeln!(out, "{:<w$}  {:>7}  {:>9}  {:>9}  {:>6}", "tag", "support", "precision", "recall", "f1");
        for m in &self.per_tag {
            let _ = writeln!(
                out,
                "{:<w$}  {:>7}  {:>9.4}  {:>9.4}  {:>6.4}",
                m.tag, m.support, m.precision, m.recall, m.f1
            );
        }
        out.push('\n');
        out.push_str(&self.confusion.render());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub rank: usize,
    pub sentence_id: String,
    pub text: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterExemplars {
    pub cluster: usize,
    pub size: usize,
    pub dominant_tags: Vec<(String, f64)>,
    pub exemplars: Vec<Exemplar>,
}

/// Per cluster, the `top_n` members closest to the centroid by cosine
/// distance (ties by sentence id) and the three most probable tags.
/// `vectors` must contain every non-noise id of `model`.
pub fn cluster_exemplars(
    model: &ClusterModel,
    vectors: &VectorSet,
    texts: &HashMap<String, String>,
    distributions: &BTreeMap<usize, TagDistribution>,
    top_n: usize,
) -> Result<Vec<ClusterExemplars>, EvaluateError> {
    if top_n == 0 {
        return Err(EvaluateError::InvalidTopN);
    }
    let row_of: HashMap<&str, usize> = vectors.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let index = CentroidIndex::new(model.centroids.clone());
    let mut members: Vec<Vec<(f64, &str)>> = vec![Vec::new(); model.k()];
    for (id, label) in model.ids.iter().zip(&model.labels) {
        let Some(c) = *label else { continue };
        let row = *row_of.get(id.as_str()).ok_or_else(|| EvaluateError::MissingVector(id.clone()))?;
        let distance = index.cosine_distance(vectors.row(row), c).unwrap_or(1.0);
        members[c].push((distance, id));
    }
    Ok(members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(cluster, mut m)| {
            m.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            let exemplars = m
                .iter()
                .take(top_n)
                .enumerate()
                .map(|(r, (distance, id))| Exemplar {
                    rank: r + 1,
                    sentence_id: id.to_string(),
                    text: texts.get(*id).cloned().unwrap_or_default(),
                    distance: *distance,
                })
                .collect();
            let dominant_tags = distributions.get(&cluster).map(|d| d.top_tags(3)).unwrap_or_default();
            ClusterExemplars { cluster, size: m.len(), dominant_tags, exemplars }
        })
        .collect())
}

/// Markdown tables, one per cluster: rank, sentence, cosine distance.
pub fn exemplars_markdown(clusters: &[ClusterExemplars]) -> String {
    let mut out = String::from("# Cluster exemplars\n");
    for c in clusters {
        let tags: Vec<String> = c.dominant_tags.iter().map(|(t, p)| format!("{t} ({p:.3})")).collect();
        let _ = write!(out, "\n## Cluster {} ({} sentences)\n\nDominant tags: {}\n\n", c.cluster, c.size, tags.join(", "));
        out.push_str("| Rank | Sentence | Distance |\n|---:|---|---:|\n");
        for e in &c.exemplars {
            let text = e.text.replace('|', "\\|").replace('\n', " ");
            let _ = writeln!(out, "| {} | {} | {:.4} |", e.rank, text, e.distance);
        }
    }
    out
}
