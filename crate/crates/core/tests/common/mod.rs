//! Shared generators for integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use theme_core::cluster::{hdbscan_fit, HdbscanParams};
use theme_core::encode::VectorSet;

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i:04}")).collect()
}

pub fn dense(points: Vec<Vec<f64>>) -> VectorSet {
    VectorSet::dense(ids(points.len()), points).unwrap()
}

/// `c` isotropic blobs of `per` points with std 0.5 around centres drawn
/// uniformly from [-10, 10]^dim. In 10-D the centres end up at similar
/// pairwise distances, so no pair of blobs merges much more cheaply than
/// another.
pub fn blobs(c: usize, per: usize, dim: usize, seed: u64) -> VectorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let centres: Vec<Vec<f64>> = (0..c).map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    let mut points = Vec::with_capacity(c * per);
    for centre in &centres {
        for _ in 0..per {
            points.push(centre.iter().map(|x| x + noise.sample(&mut rng)).collect());
        }
    }
    dense(points)
}

/// Uniform points in the unit square.
pub fn uniform(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Lowest distortion over every labeling of `points` into exactly `k`
/// non-empty groups.
pub fn brute_force_distortion(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        if counts.iter().all(|&c| c > 0) {
            let cost: f64 = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| p.iter().zip(&sums[l]).map(|(x, s)| (x - s / counts[l] as f64).powi(2)).sum::<f64>())
                .sum();
            best = best.min(cost);
        }
        // Next labeling in base k.
        let mut i = 0;
        while i < n && labels[i] == k - 1 {
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
        labels[i] += 1;
    }
}

#[derive(Deserialize)]
pub struct Fixture {
    pub name: String,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub allow_single_cluster: bool,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<i64>,
}

pub fn load_fixture(name: &str) -> Fixture {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/hdbscan").join(format!("{name}.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn fit_fixture(f: &Fixture) -> Vec<i64> {
    let ids = (0..f.points.len()).map(|i| format!("p{i:03}")).collect();
    let vectors = VectorSet::dense(ids, f.points.clone()).unwrap();
    let params = HdbscanParams {
        min_cluster_size: f.min_cluster_size,
        min_samples: f.min_samples,
        allow_single_cluster: f.allow_single_cluster,
    };
    hdbscan_fit(&vectors, &params).unwrap().labels.iter().map(|l| l.map_or(-1, |c| c as i64)).collect()
}

/// True when the labelings agree up to a bijection between cluster ids, with
/// identical noise sets.
pub fn same_partition(a: &[i64], b: &[i64]) -> bool {
    let mut forward = HashMap::new();
    let mut backward = HashMap::new();
    a.len() == b.len()
        && a.iter().zip(b).all(|(&x, &y)| {
            if x == -1 || y == -1 {
                return x == y;
            }
            *forward.entry(x).or_insert(y) == y && *backward.entry(y).or_insert(x) == x
        })
}
