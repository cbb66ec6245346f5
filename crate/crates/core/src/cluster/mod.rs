//! From-scratch KMeans (k-means++ start, Lloyd iteration, elbow selection
//! of k) and HDBSCAN over a [`VectorSet`](crate::encode::VectorSet).

mod artifact;
mod elbow;
mod hdbscan;
mod kmeans;

use std::path::PathBuf;

use thiserror::Error;

pub use artifact::{Algorithm, ClusterModel, ClusterSummary};
pub use elbow::{elbow_select, inflection_point, modal_k, ElbowConfig, ElbowResult};
pub use hdbscan::{
    core_distances, hdbscan_fit, minimum_spanning_tree, mutual_reachability, HdbscanModel, HdbscanParams, MstEdge,
};
pub use kmeans::{distinct_rows, distortion, kmeans_fit, kmeans_fit_best, KMeansModel, KMeansParams};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("no vectors to cluster")]
    EmptyInput,
    #[error("k = {k} is invalid for {distinct} distinct vectors")]
    InvalidK { k: usize, distinct: usize },
    #[error("elbow grid has {points} points; at least 3 are needed")]
    GridTooShort { points: usize },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("failed to access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a model artifact: bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("corrupt model artifact: {0}")]
    Corrupt(String),
}
