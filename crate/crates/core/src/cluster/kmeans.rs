use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::encode::{RowRef, VectorSet};

/// A fitted KMeans partition. `assignments` is aligned with `ids`, which keep
/// the order of the input set.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub ids: Vec<String>,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations_run: usize,
    pub distortion: f64,
    pub seed: u64,
    /// Distortion after each assignment step.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid movement.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest distortion wins.
    pub restarts: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-6, restarts: 1 }
    }
}

/// Σᵢ ‖xᵢ − c(assign(i))‖².
pub fn distortion(vectors: &VectorSet, centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    (0..vectors.len()).map(|i| vectors.row(i).dist_sq_dense(&centroids[assignments[i]])).sum()
}

/// Number of distinct rows, comparing exact bit patterns.
pub fn distinct_rows(vectors: &VectorSet) -> usize {
    (0..vectors.len()).map(|i| vectors.row(i).fingerprint()).collect::<HashSet<_>>().len()
}

/// Lloyd iteration from a k-means++ start. Points are visited in id order,
/// so the result does not depend on the order of the input set.
pub fn kmeans_fit(vectors: &VectorSet, k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KMeansModel, ClusterError> {
    check_k(vectors, k)?;
    Ok(Lloyd::new(vectors).run(k, &mut ChaCha8Rng::seed_from_u64(seed), seed, max_iter, tol))
}

/// Best of `restarts` runs. Restart `r` draws from stream `r` of the seeded
/// generator, so restart 0 reproduces [`kmeans_fit`].
pub fn kmeans_fit_best(vectors: &VectorSet, k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansModel, ClusterError> {
    check_k(vectors, k)?;
    let lloyd = Lloyd::new(vectors);
    let mut best: Option<KMeansModel> = None;
    for r in 0..params.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let model = lloyd.run(k, &mut rng, seed, params.max_iter, params.tol);
        if best.as_ref().is_none_or(|b| model.distortion < b.distortion) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Index whose cumulative D² weight first exceeds `target`. Points already
/// chosen have weight zero and are never returned.
fn d2_sample(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut pick = None;
    for (i, &d) in weights.iter().enumerate() {
        if d > 0.0 {
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
    }
    pick.expect("k never exceeds the distinct point count")
}

fn check_k(vectors: &VectorSet, k: usize) -> Result<(), ClusterError> {
    if vectors.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    let distinct = distinct_rows(vectors);
    if k == 0 || k > distinct {
        return Err(ClusterError::InvalidK { k, distinct });
    }
    Ok(())
}

struct Lloyd<'a> {
    vectors: &'a VectorSet,
    /// Input indices sorted by id.
    order: Vec<usize>,
}

impl<'a> Lloyd<'a> {
    fn new(vectors: &'a VectorSet) -> Self {
        let mut order: Vec<usize> = (0..vectors.len()).collect();
        order.sort_by(|&a, &b| vectors.ids()[a].cmp(&vectors.ids()[b]));
        Self { vectors, order }
    }

    fn point(&self, i: usize) -> RowRef<'a> {
        self.vectors.row(self.order[i])
    }

    fn n(&self) -> usize {
        self.order.len()
    }

    fn init_plus_plus(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let dim = self.vectors.dim();
        let first = rng.random_range(0..self.n());
        let mut centroids = vec![self.point(first).to_dense(dim)];
        let mut nearest: Vec<f64> = (0..self.n()).into_par_iter().map(|i| self.point(i).dist_sq(&self.point(first))).collect();
        while centroids.len() < k {
            let total: f64 = nearest.iter().sum();
            let chosen = self.point(d2_sample(&nearest, rng.random::<f64>() * total));
            nearest.par_iter_mut().enumerate().for_each(|(i, d)| *d = d.min(self.point(i).dist_sq(&chosen)));
            centroids.push(chosen.to_dense(dim));
        }
        centroids
    }

    /// Nearest centroid per point; ties go to the lower index. Sparse rows
    /// use ‖x‖² + ‖c‖² − 2x·c so the cost scales with their nonzeros.
    fn assign(&self, centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
        let norms: Vec<f64> = if self.vectors.is_sparse() {
            centroids.iter().map(|c| c.iter().map(|x| x * x).sum()).collect()
        } else {
            Vec::new()
        };
        (0..self.n())
            .into_par_iter()
            .map(|i| {
                let p = self.point(i);
                let p_norm = if norms.is_empty() { 0.0 } else { p.norm_sq() };
                let mut best = (0, f64::INFINITY);
                for (c, centroid) in centroids.iter().enumerate() {
                    let d = match p {
                        RowRef::Sparse(_) => (p_norm + norms[c] - 2.0 * p.dot_dense(centroid)).max(0.0),
                        RowRef::Dense(_) => p.dist_sq_dense(centroid),
                    };
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                best
            })
            .collect()
    }

    /// Member means in id order. Empty clusters keep `previous`; the flags
    /// mark them.
    fn means(&self, labels: &[usize], previous: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<bool>) {
        let k = previous.len();
        let mut sums = vec![vec![0.0; self.vectors.dim()]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            self.point(i).add_into(&mut sums[c], 1.0);
            counts[c] += 1;
        }
        let mut empty = vec![false; k];
        for c in 0..k {
            if counts[c] == 0 {
                sums[c] = previous[c].clone();
                empty[c] = true;
            } else {
                let inv = counts[c] as f64;
                sums[c].iter_mut().for_each(|x| *x /= inv);
            }
        }
        (sums, empty)
    }

    fn run(&self, k: usize, rng: &mut ChaCha8Rng, seed: u64, max_iter: usize, tol: f64) -> KMeansModel {
        let dim = self.vectors.dim();
        let mut centroids = self.init_plus_plus(k, rng);
        let mut labels: Vec<usize> = Vec::new();
        let mut history = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iter.max(1) {
            iterations += 1;
            let assigned = self.assign(&centroids);
            history.push(assigned.iter().map(|(_, d)| d).sum());
            let new_labels: Vec<usize> = assigned.iter().map(|(c, _)| *c).collect();
            if new_labels == labels {
                converged = true;
                break;
            }
            labels = new_labels;
            let (mut next, empty) = self.means(&labels, &centroids);
            let mut reseeded = false;
            if empty.iter().any(|&e| e) {
                // Farthest points from their own centroid replace empty clusters.
                let mut spread: Vec<(f64, usize)> =
                    (0..self.n()).map(|i| (self.point(i).dist_sq_dense(&next[labels[i]]), i)).collect();
                spread.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let mut donors = spread.into_iter();
                for c in (0..k).filter(|&c| empty[c]) {
                    if let Some((_, i)) = donors.next() {
                        next[c] = self.point(i).to_dense(dim);
                        reseeded = true;
                    }
                }
            }
            let shift = centroids
                .iter()
                .zip(&next)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            centroids = next;
            if !reseeded && shift < tol {
                converged = true;
                break;
            }
        }
        // After a tolerance break or at max_iter the labels predate the last
        // centroid update; report the partition the final centroids induce.
        let fresh: Vec<usize> = self.assign(&centroids).into_iter().map(|(c, _)| c).collect();
        if fresh != labels {
            labels = fresh;
            centroids = self.means(&labels, &centroids).0;
        }
        let mut assignments = vec![0; self.n()];
        for (i, &c) in labels.iter().enumerate() {
            assignments[self.order[i]] = c;
        }
        let distortion = (0..self.n()).map(|i| self.point(i).dist_sq_dense(&centroids[labels[i]])).sum();
        KMeansModel {
            ids: self.vectors.ids().to_vec(),
            assignments,
            centroids,
            iterations_run: iterations,
            distortion,
            seed,
            history,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: &[(f64, f64)]) -> VectorSet {
        let ids = (0..points.len()).map(|i| format!("p{i:02}")).collect();
        VectorSet::dense(ids, points.iter().map(|&(x, y)| vec![x, y]).collect()).unwrap()
    }

    #[test]
    fn four_point_fixture() {
        let v = set(&[(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]);
        let m = kmeans_fit(&v, 2, 7, 100, 1e-9).unwrap();
        let mut cs = m.centroids.clone();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cs, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
        assert_eq!(m.distortion, 1.0);
        assert!(m.converged);
    }

    #[test]
    fn k_equal_to_n_gives_zero_distortion() {
        let v = set(&[(0.0, 0.0), (1.0, 2.0), (3.0, -1.0)]);
        let m = kmeans_fit(&v, 3, 1, 100, 1e-9).unwrap();
        assert_eq!(m.distortion, 0.0);
        let mut a = m.assignments.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let v = set(&[(1.0, 1.0), (1.0, 1.0), (2.0, 2.0)]);
        assert!(matches!(kmeans_fit(&v, 3, 0, 10, 1e-6), Err(ClusterError::InvalidK { k: 3, distinct: 2 })));
        assert!(matches!(kmeans_fit(&v, 0, 0, 10, 1e-6), Err(ClusterError::InvalidK { .. })));
    }

    #[test]
    fn identical_points_single_cluster() {
        let v = set(&[(2.0, 2.0); 5]);
        let m = kmeans_fit(&v, 1, 0, 10, 1e-6).unwrap();
        assert_eq!(m.distortion, 0.0);
    }

    #[test]
    fn restart_zero_matches_single_fit() {
        let v = set(&[(0.0, 0.0), (0.3, 0.1), (5.0, 5.0), (5.2, 4.9), (9.0, 0.0), (8.7, 0.2)]);
        let single = kmeans_fit(&v, 3, 11, 50, 1e-9).unwrap();
        let best = kmeans_fit_best(&v, 3, 11, &KMeansParams { max_iter: 50, tol: 1e-9, restarts: 1 }).unwrap();
        assert_eq!(single, best);
    }

    #[test]
    fn distortion_of_hand_partition() {
        let v = set(&[(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]);
        let d = distortion(&v, &[vec![0.0, 0.5], vec![10.0, 0.5]], &[0, 0, 1, 1]);
        assert_eq!(d, 1.0);
    }
}
