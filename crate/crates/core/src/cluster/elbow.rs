use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_fit_best, KMeansParams};
use super::ClusterError;
use crate::encode::VectorSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElbowConfig {
    pub k_start: usize,
    pub k_step: usize,
    pub k_max: usize,
    pub trials: usize,
}

impl Default for ElbowConfig {
    fn default() -> Self {
        Self { k_start: 100, k_step: 100, k_max: 1000, trials: 5 }
    }
}

impl ElbowConfig {
    pub fn grid(&self) -> Vec<usize> {
        if self.k_step == 0 || self.k_start == 0 {
            return Vec::new();
        }
        (self.k_start..=self.k_max).step_by(self.k_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub k_grid: Vec<usize>,
    /// `distortions[t][g]` is trial t's distortion at `k_grid[g]`.
    pub distortions: Vec<Vec<f64>>,
    pub inflections: Vec<usize>,
    pub chosen_k: usize,
}

/// Interior grid point with the largest second difference
/// d(k−step) − 2d(k) + d(k+step); ties go to the smaller k.
pub fn inflection_point(k_grid: &[usize], curve: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for g in 1..curve.len().saturating_sub(1) {
        let second = curve[g - 1] - 2.0 * curve[g] + curve[g + 1];
        if best.is_none_or(|(_, b)| second > b) {
            best = Some((k_grid[g], second));
        }
    }
    best.map(|(k, _)| k)
}

/// Most frequent value; ties go to the smaller one.
pub fn modal_k(inflections: &[usize]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in inflections {
        *counts.entry(k).or_default() += 1;
    }
    let top = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == top).map(|(k, _)| k)
}

/// Trial `t` fits every grid k with seed `seed + t`.
pub fn elbow_select(
    vectors: &VectorSet,
    config: &ElbowConfig,
    params: &KMeansParams,
    seed: u64,
) -> Result<ElbowResult, ClusterError> {
    let k_grid = config.grid();
    if k_grid.len() < 3 {
        return Err(ClusterError::GridTooShort { points: k_grid.len() });
    }
    if config.trials == 0 {
        return Err(ClusterError::InvalidParameter("elbow trials must be at least 1".into()));
    }
    let mut distortions = Vec::with_capacity(config.trials);
    let mut inflections = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        let trial_seed = seed.wrapping_add(t as u64);
        let curve = k_grid
            .iter()
            .map(|&k| kmeans_fit_best(vectors, k, trial_seed, params).map(|m| m.distortion))
            .collect::<Result<Vec<_>, _>>()?;
        tracing::debug!(trial = t, ?curve, "elbow trial");
        inflections.push(inflection_point(&k_grid, &curve).expect("grid has an interior point"));
        distortions.push(curve);
    }
    let chosen_k = modal_k(&inflections).expect("at least one trial");
    Ok(ElbowResult { k_grid, distortions, inflections, chosen_k })
}
