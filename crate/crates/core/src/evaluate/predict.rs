use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterModel;
use crate::encode::RowRef;

/// Tag counts of one cluster's training sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagDistribution {
    pub cluster: usize,
    /// N_ij per tag.
    pub counts: BTreeMap<String, u64>,
    /// N_i = Σⱼ N_ij.
    pub total: u64,
}

impl TagDistribution {
    /// p_ij as an exact fraction; zero for tags the cluster never saw.
    pub fn p(&self, tag: &str) -> BigRational {
        match self.counts.get(tag) {
            Some(&n) if self.total > 0 => BigRational::new(n.into(), self.total.into()),
            _ => BigRational::zero(),
        }
    }

    pub fn p_f64(&self, tag: &str) -> f64 {
        self.p(tag).to_f64().unwrap_or(0.0)
    }

    /// The `n` most probable tags; ties go to the lexicographically smaller tag.
    pub fn top_tags(&self, n: usize) -> Vec<(String, f64)> {
        let mut tags: Vec<(&String, u64)> = self.counts.iter().map(|(t, &c)| (t, c)).collect();
        tags.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        tags.into_iter().take(n).map(|(t, c)| (t.clone(), c as f64 / self.total as f64)).collect()
    }
}

/// Per-cluster distributions over the assigned sentences. Each
/// (sentence, tag) pair counts once; noise and empty clusters are omitted.
pub fn tag_distributions<'a>(
    labels: &[Option<usize>],
    tags: impl IntoIterator<Item = &'a BTreeSet<String>>,
) -> Vec<TagDistribution> {
    let mut by_cluster: BTreeMap<usize, TagDistribution> = BTreeMap::new();
    for (label, sentence_tags) in labels.iter().zip(tags) {
        let Some(cluster) = *label else { continue };
        let dist = by_cluster
            .entry(cluster)
            .or_insert_with(|| TagDistribution { cluster, counts: BTreeMap::new(), total: 0 });
        for tag in sentence_tags {
            *dist.counts.entry(tag.clone()).or_default() += 1;
            dist.total += 1;
        }
    }
    by_cluster.into_values().filter(|d| d.total > 0).collect()
}

/// Two cosine distances closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Centroids with precomputed norms for cosine lookups.
#[derive(Debug, Clone)]
pub struct CentroidIndex {
    centroids: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub cluster: usize,
    pub distance: f64,
}

impl CentroidIndex {
    pub fn new(centroids: Vec<Vec<f64>>) -> Self {
        let norms = centroids.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        Self { centroids, norms }
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i]
    }

    pub fn cosine_distance(&self, v: RowRef<'_>, cluster: usize) -> Option<f64> {
        let vn = v.norm();
        let cn = self.norms[cluster];
        (vn > 0.0 && cn > 0.0).then(|| 1.0 - v.dot_dense(&self.centroids[cluster]) / (vn * cn))
    }

    /// argmin of 1 − cos(v, c). A later centroid must be closer by more than
    /// [`TIE_TOLERANCE`] to displace an earlier one. `None` for a zero query
    /// (the sentence is skipped) or when every centroid is zero.
    pub fn nearest(&self, v: RowRef<'_>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for cluster in 0..self.centroids.len() {
            let Some(distance) = self.cosine_distance(v, cluster) else { continue };
            if best.is_none_or(|b| distance < b.distance - TIE_TOLERANCE) {
                best = Some(Hit { cluster, distance });
            }
        }
        best
    }
}

/// Convenience form of [`CentroidIndex::nearest`].
pub fn nearest_cluster(vector: RowRef<'_>, centroids: &[Vec<f64>]) -> Option<Hit> {
    CentroidIndex::new(centroids.to_vec()).nearest(vector)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prediction {
    Tag(String),
    /// Every sentence of the question was skipped.
    Abstain,
}

impl Prediction {
    pub fn tag(&self) -> Option<&str> {
        match self {
            Prediction::Tag(t) => Some(t),
            Prediction::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionPrediction {
    pub question_id: String,
    /// Nearest cluster per scored sentence (the set U, in sentence order).
    pub clusters: Vec<usize>,
    pub skipped: usize,
    /// (1/K) Σₖ p_{iₖ j} for every tag with a nonzero score.
    pub scores: BTreeMap<String, BigRational>,
    pub predicted: Prediction,
}

impl QuestionPrediction {
    pub fn score(&self) -> BigRational {
        self.predicted.tag().and_then(|t| self.scores.get(t).cloned()).unwrap_or_else(BigRational::zero)
    }
}

/// Averages the distributions of the clusters each sentence lands in and
/// predicts the highest-scoring tag (ties go to the lexicographically
/// smaller tag). `hits[k]` is `None` for a skipped sentence.
pub fn predict_question(
    question_id: &str,
    hits: &[Option<usize>],
    distributions: &BTreeMap<usize, TagDistribution>,
) -> QuestionPrediction {
    let clusters: Vec<usize> = hits.iter().flatten().copied().collect();
    let skipped = hits.len() - clusters.len();
    let mut sums: BTreeMap<String, BigRational> = BTreeMap::new();
    for cluster in &clusters {
        if let Some(dist) = distributions.get(cluster) {
            for tag in dist.counts.keys() {
                *sums.entry(tag.clone()).or_insert_with(BigRational::zero) += dist.p(tag);
            }
        }
    }
    let k = BigRational::from_integer((clusters.len() as u64).into());
    let scores: BTreeMap<String, BigRational> =
        sums.into_iter().filter(|(_, s)| !s.is_zero()).map(|(t, s)| (t, s / k.clone())).collect();
    let mut best: Option<(&String, &BigRational)> = None;
    for (tag, score) in &scores {
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((tag, score));
        }
    }
    let predicted = match best {
        Some((tag, _)) => Prediction::Tag(tag.clone()),
        None => Prediction::Abstain,
    };
    QuestionPrediction { question_id: question_id.to_string(), clusters, skipped, scores, predicted }
}

/// A fitted clustering used as a classifier: centroids for lookup and the
/// tag distributions of the training sentences.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub index: CentroidIndex,
    pub distributions: BTreeMap<usize, TagDistribution>,
}

impl Classifier {
    /// `unit_tags` is aligned with `model.ids`.
    pub fn new(model: &ClusterModel, unit_tags: &[BTreeSet<String>]) -> Self {
        let distributions =
            tag_distributions(&model.labels, unit_tags).into_iter().map(|d| (d.cluster, d)).collect();
        Self { index: CentroidIndex::new(model.centroids.clone()), distributions }
    }

    pub fn predict(&self, question_id: &str, sentences: &[RowRef<'_>]) -> QuestionPrediction {
        let hits: Vec<Option<usize>> = sentences.iter().map(|v| self.index.nearest(*v).map(|h| h.cluster)).collect();
        predict_question(question_id, &hits, &self.distributions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn dist(cluster: usize, counts: &[(&str, u64)]) -> TagDistribution {
        TagDistribution {
            cluster,
            counts: counts.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            total: counts.iter().map(|(_, c)| c).sum(),
        }
    }

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn single_and_dual_tag_point_masses() {
        let d = tag_distributions(&[Some(0)], [&tags(&["a"])]);
        assert_eq!(d[0].p("a"), ratio(1, 1));
        let d = tag_distributions(&[Some(0)], [&tags(&["a", "b"])]);
        assert_eq!(d[0].total, 2);
        assert_eq!(d[0].p("a"), ratio(1, 2));
        assert_eq!(d[0].p("b"), ratio(1, 2));
    }

    #[test]
    fn noise_and_empty_clusters_are_omitted() {
        let t = tags(&["a"]);
        let d = tag_distributions(&[None, Some(2), None], [&t, &t, &t]);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].cluster, 2);
        assert_eq!(d[0].total, 1);
    }

    #[test]
    fn nearest_cluster_examples() {
        let cs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(nearest_cluster(RowRef::Dense(&[0.9, 0.1]), &cs).unwrap().cluster, 0);
        let hit = nearest_cluster(RowRef::Dense(&[0.0, 1.0]), &cs).unwrap();
        assert_eq!((hit.cluster, hit.distance), (1, 0.0));
        assert_eq!(nearest_cluster(RowRef::Dense(&[1.0, 1.0]), &cs).unwrap().cluster, 0);
        assert_eq!(nearest_cluster(RowRef::Dense(&[0.0, 0.0]), &cs), None);
    }

    #[test]
    fn lexicographic_tie_at_one_half() {
        let ds = BTreeMap::from([(0, dist(0, &[("a", 1), ("b", 1)])), (1, dist(1, &[("b", 1), ("a", 1)]))]);
        let p = predict_question("q", &[Some(0), Some(1)], &ds);
        assert_eq!(p.predicted, Prediction::Tag("a".into()));
        assert_eq!(p.score(), ratio(1, 2));
    }

    #[test]
    fn skipped_sentences_do_not_count_and_all_skipped_abstains() {
        let ds = BTreeMap::from([(0, dist(0, &[("a", 1)]))]);
        let p = predict_question("q", &[None, Some(0)], &ds);
        assert_eq!(p.skipped, 1);
        assert_eq!(p.score(), ratio(1, 1));
        let p = predict_question("q", &[None, None], &ds);
        assert_eq!(p.predicted, Prediction::Abstain);
        assert_eq!(p.skipped, 2);
    }

    #[test]
    fn top_tags_order() {
        let d = dist(0, &[("b", 2), ("a", 2), ("c", 5), ("d", 1)]);
        let top: Vec<String> = d.top_tags(3).into_iter().map(|(t, _)| t).collect();
        assert_eq!(top, vec!["c", "a", "b"]);
    }
}
