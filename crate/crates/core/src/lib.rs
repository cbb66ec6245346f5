//! Theme detection over tagged short-text corpora.
//!
//! Questions are split into sentence-level strings, encoded as vectors,
//! clustered, and the clusters are scored as a tag classifier.

pub mod cluster;
pub mod corpus;
pub mod encode;
pub mod evaluate;
pub mod pipeline;
pub mod represent;
pub mod synthetic;
