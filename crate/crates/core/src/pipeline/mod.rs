//! Configuration-driven orchestration: ingest, represent, encode, cluster
//! and evaluate, each cached by content hash, plus run manifests and
//! cross-run comparison.

mod cache;
mod compare;
mod config;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub use cache::{sha256_bytes, sha256_file, stage_key, CacheEntry, StageCache};
pub use compare::{compare_runs, Comparison, ComparisonRow};
pub use config::{
    ClusterSection, CorpusSection, EmbeddingFileSection, EncoderKind, EncoderSection, EndpointSection,
    KMeansSection, ReportSection, RepresentSection, Representation, RunConfig, SplitSection, TagsSection,
    DEFAULT_K, ENV_OVERRIDES,
};
pub use run::{
    run_grid, run_pipeline, RunLabels, RunLog, RunManifest, RunOptions, RunOutcome, StageRecord, StageTiming,
    MANIFEST_FILE, RUN_LOG_FILE,
};

use crate::cluster::ClusterError;
use crate::corpus::CorpusError;
use crate::encode::EncodeError;
use crate::evaluate::EvaluateError;
use crate::represent::RepresentError;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Represent,
    Encode,
    Cluster,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Ingest, Stage::Represent, Stage::Encode, Stage::Cluster, Stage::Evaluate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Represent => "represent",
            Stage::Encode => "encode",
            Stage::Cluster => "cluster",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}` (expected ingest, represent, encode, cluster or evaluate)"))
    }
}

/// Failures of the module a stage delegates to.
#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Represent(#[from] RepresentError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error("{0}")]
    Data(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage { stage: Stage, source: StageFailure },
    #[error("cannot compare runs: {0}")]
    Compare(String),
    #[error("failed to access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status: 1 configuration, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Stage { .. } | PipelineError::Compare(_) => 2,
            PipelineError::Io { .. } | PipelineError::Internal(_) => 3,
        }
    }
}
