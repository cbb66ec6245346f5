//! Density-based hierarchical clustering.
//!
//! The steps follow the standard formulation: core distances, the
//! mutual-reachability graph, its minimum spanning tree (Prim, grown from
//! point 0), a single-linkage hierarchy, condensation by minimum cluster size,
//! and excess-of-mass selection. Tie handling matches the widely used
//! scikit-learn implementation so labels can be compared one to one:
//!
//! * the core distance counts the point itself as its first neighbour;
//! * Prim keeps the first candidate on equal reachability;
//! * spanning-tree edges are merged in stable weight order;
//! * a cluster is replaced by its children only when their summed stability
//!   is strictly larger.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::encode::VectorSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Lets the root of the hierarchy be selected, so a dataset with a single
    /// dense region comes back as one cluster instead of all noise.
    pub allow_single_cluster: bool,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self { min_cluster_size: 5, min_samples: 3, allow_single_cluster: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdbscanModel {
    pub ids: Vec<String>,
    /// Aligned with `ids`; `None` is noise.
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
    /// Unweighted member means, L2-normalized.
    pub centroids: Vec<Vec<f64>>,
    pub params: HdbscanParams,
}

impl HdbscanModel {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        self.labels.iter().flatten().for_each(|&c| sizes[c] += 1);
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

fn distance(vectors: &VectorSet, a: usize, b: usize) -> f64 {
    vectors.row(a).dist_sq(&vectors.row(b)).sqrt()
}

/// Distance from each point to its `min_samples`-th nearest neighbour,
/// counting the point itself (so `min_samples = 1` gives zeros). Clamped to
/// the farthest point when `min_samples` exceeds the point count.
pub fn core_distances(vectors: &VectorSet, min_samples: usize) -> Vec<f64> {
    let n = vectors.len();
    let rank = min_samples.clamp(1, n.max(1)) - 1;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| if i == j { 0.0 } else { distance(vectors, i, j) }).collect();
            *row.select_nth_unstable_by(rank, f64::total_cmp).1
        })
        .collect()
}

pub fn mutual_reachability(vectors: &VectorSet, core: &[f64], a: usize, b: usize) -> f64 {
    let d = if a == b { 0.0 } else { distance(vectors, a, b) };
    core[a].max(core[b]).max(d)
}

/// Prim's algorithm over the implicit mutual-reachability graph, in the order
/// edges are added.
pub fn minimum_spanning_tree(vectors: &VectorSet, core: &[f64]) -> Vec<MstEdge> {
    let n = vectors.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut min_reach = vec![f64::INFINITY; n];
    let mut sources = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    for _ in 0..n - 1 {
        in_tree[current] = true;
        let dists: Vec<f64> =
            (0..n).into_par_iter().map(|j| if in_tree[j] { 0.0 } else { distance(vectors, current, j) }).collect();
        let mut best = (f64::MAX, 0usize, 0usize);
        for j in (0..n).filter(|&j| !in_tree[j]) {
            let mrd = core[current].max(core[j]).max(dists[j]);
            if mrd < min_reach[j] {
                min_reach[j] = mrd;
                sources[j] = current;
                if mrd < best.0 {
                    best = (mrd, current, j);
                }
            } else if min_reach[j] < best.0 {
                best = (min_reach[j], sources[j], j);
            }
        }
        edges.push(MstEdge { a: best.1, b: best.2, weight: best.0 });
        current = best.2;
    }
    edges
}

/// A merge in the single-linkage tree. Node ids below `n` are points; merge
/// `i` creates node `n + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage(mut edges: Vec<MstEdge>, n: usize) -> Vec<Merge> {
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    let mut parent: Vec<Option<usize>> = vec![None; 2 * n - 1];
    let mut size = vec![1usize; 2 * n - 1];
    let find = |parent: &mut Vec<Option<usize>>, mut x: usize| {
        let start = x;
        while let Some(p) = parent[x] {
            x = p;
        }
        let root = x;
        let mut y = start;
        while let Some(p) = parent[y] {
            if p == root {
                break;
            }
            parent[y] = Some(root);
            y = p;
        }
        root
    };
    let mut merges = Vec::with_capacity(n - 1);
    for (i, e) in edges.iter().enumerate() {
        let left = find(&mut parent, e.a);
        let right = find(&mut parent, e.b);
        let node = n + i;
        size[node] = size[left] + size[right];
        parent[left] = Some(node);
        parent[right] = Some(node);
        merges.push(Merge { left, right, distance: e.weight, size: size[node] });
    }
    merges
}

/// Level-order walk of the single-linkage tree below `root`.
fn bfs(merges: &[Merge], n: usize, root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut level = vec![root];
    while !level.is_empty() {
        out.extend_from_slice(&level);
        level = level
            .iter()
            .filter(|&&x| x >= n)
            .flat_map(|&x| [merges[x - n].left, merges[x - n].right])
            .collect();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Condensed {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

/// Condensed tree. The root cluster is `n`; new clusters are numbered from
/// `n + 1` in discovery order.
fn condense(merges: &[Merge], n: usize, min_cluster_size: usize) -> Vec<Condensed> {
    let root = 2 * merges.len();
    let mut relabel = vec![0usize; root + 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut ignore = vec![false; root + 1];
    let mut out = Vec::new();
    let count = |node: usize| if node >= n { merges[node - n].size } else { 1 };
    let fall_out = |out: &mut Vec<Condensed>, ignore: &mut Vec<bool>, parent: usize, subtree: usize, lambda: f64| {
        for sub in bfs(merges, n, subtree) {
            if sub < n {
                out.push(Condensed { parent, child: sub, lambda, size: 1 });
            }
            ignore[sub] = true;
        }
    };
    for node in bfs(merges, n, root) {
        if ignore[node] || node < n {
            continue;
        }
        let Merge { left, right, distance, .. } = merges[node - n];
        let lambda = if distance > 0.0 { 1.0 / distance } else { f64::INFINITY };
        let (lc, rc) = (count(left), count(right));
        let me = relabel[node];
        match (lc >= min_cluster_size, rc >= min_cluster_size) {
            (true, true) => {
                for (child, size) in [(left, lc), (right, rc)] {
                    relabel[child] = next_label;
                    next_label += 1;
                    out.push(Condensed { parent: me, child: relabel[child], lambda, size });
                }
            }
            (false, false) => {
                fall_out(&mut out, &mut ignore, me, left, lambda);
                fall_out(&mut out, &mut ignore, me, right, lambda);
            }
            (false, true) => {
                relabel[right] = me;
                fall_out(&mut out, &mut ignore, me, left, lambda);
            }
            (true, false) => {
                relabel[left] = me;
                fall_out(&mut out, &mut ignore, me, right, lambda);
            }
        }
    }
    out
}

/// Excess-of-mass selection over clusters in descending id order (children
/// before parents). Returns the selected cluster ids, ascending.
fn select_clusters(tree: &[Condensed], n: usize, allow_single_cluster: bool) -> Vec<usize> {
    let Some(max_cluster) = tree.iter().map(|r| r.parent).max() else {
        return Vec::new();
    };
    let slots = max_cluster - n + 1;
    let mut birth = vec![0.0; slots];
    for r in tree.iter().filter(|r| r.child >= n) {
        birth[r.child - n] = r.lambda;
    }
    let mut stability = vec![0.0; slots];
    let mut is_parent = vec![false; slots];
    for r in tree {
        stability[r.parent - n] += (r.lambda - birth[r.parent - n]) * r.size as f64;
        is_parent[r.parent - n] = true;
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); slots];
    for r in tree.iter().filter(|r| r.size > 1) {
        children[r.parent - n].push(r.child);
    }
    let lowest = if allow_single_cluster { n } else { n + 1 };
    let mut selected = vec![false; slots];
    for node in (lowest..=max_cluster).rev().filter(|&c| is_parent[c - n]) {
        selected[node - n] = true;
        let subtree: f64 = children[node - n].iter().map(|&c| stability[c - n]).sum();
        if subtree > stability[node - n] {
            selected[node - n] = false;
            stability[node - n] = subtree;
        } else {
            let mut stack = children[node - n].clone();
            while let Some(c) = stack.pop() {
                selected[c - n] = false;
                stack.extend_from_slice(&children[c - n]);
            }
        }
    }
    (n..=max_cluster).filter(|&c| selected[c - n]).collect()
}

/// Labels each point with its nearest selected ancestor in the condensed tree.
fn label_points(tree: &[Condensed], n: usize, selected: &[usize]) -> Vec<Option<usize>> {
    if selected == [n] {
        return vec![Some(0); n];
    }
    let max_cluster = tree.iter().map(|r| r.parent).max().unwrap_or(n);
    let mut parent_of = vec![None; max_cluster + 1];
    for r in tree {
        parent_of[r.child] = Some(r.parent);
    }
    let mut label_of = vec![None; max_cluster + 1];
    for (label, &c) in selected.iter().enumerate() {
        label_of[c] = Some(label);
    }
    (0..n)
        .map(|p| {
            let mut node = parent_of[p];
            while let Some(c) = node {
                if let Some(label) = label_of[c] {
                    return Some(label);
                }
                node = parent_of[c];
            }
            None
        })
        .collect()
}

pub fn hdbscan_fit(vectors: &VectorSet, params: &HdbscanParams) -> Result<HdbscanModel, ClusterError> {
    if params.min_cluster_size < 2 {
        return Err(ClusterError::InvalidParameter("min_cluster_size must be at least 2".into()));
    }
    if params.min_samples < 1 {
        return Err(ClusterError::InvalidParameter("min_samples must be at least 1".into()));
    }
    let n = vectors.len();
    let labels = if n < params.min_cluster_size || n < 2 {
        vec![None; n]
    } else {
        let core = core_distances(vectors, params.min_samples);
        let merges = single_linkage(minimum_spanning_tree(vectors, &core), n);
        let tree = condense(&merges, n, params.min_cluster_size);
        let selected = select_clusters(&tree, n, params.allow_single_cluster);
        label_points(&tree, n, &selected)
    };
    let n_clusters = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    let centroids = member_centroids(vectors, &labels, n_clusters);
    Ok(HdbscanModel { ids: vectors.ids().to_vec(), labels, n_clusters, centroids, params: params.clone() })
}

fn member_centroids(vectors: &VectorSet, labels: &[Option<usize>], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; vectors.dim()]; k];
    let mut counts = vec![0usize; k];
    for (i, label) in labels.iter().enumerate() {
        if let Some(c) = *label {
            vectors.row(i).add_into(&mut sums[c], 1.0);
            counts[c] += 1;
        }
    }
    for (sum, count) in sums.iter_mut().zip(counts) {
        sum.iter_mut().for_each(|x| *x /= count as f64);
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            sum.iter_mut().for_each(|x| *x /= norm);
        }
    }
    sums
}
