//! Clusters as a classifier: per-cluster tag distributions, averaged
//! question scores, Micro-F1, a confusion matrix and exemplar reports.
//!
//! Tie rules: the nearest centroid is the lowest index among those within
//! 1e-12 of the best cosine distance; the predicted tag is the
//! lexicographically smallest among equal top scores. Scores are exact
//! fractions, so these comparisons do not depend on summation order.

mod metrics;
mod predict;
mod report;

use thiserror::Error;

pub use metrics::{confusion_matrix, micro_f1, per_tag_metrics, ConfusionMatrix, TagMetrics, OTHER};
pub use predict::{
    nearest_cluster, predict_question, tag_distributions, CentroidIndex, Classifier, Hit, Prediction,
    QuestionPrediction, TagDistribution, TIE_TOLERANCE,
};
pub use report::{
    build_report, cluster_exemplars, exemplars_markdown, ClusterExemplars, EvalReport, Exemplar, PredictionRecord,
};

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("{predictions} predictions for {golds} gold labels")]
    Misaligned { predictions: usize, golds: usize },
    #[error("top_m must be at least 1")]
    InvalidTopM,
    #[error("top_n must be at least 1")]
    InvalidTopN,
    #[error("no vector for sentence `{0}`")]
    MissingVector(String),
}
