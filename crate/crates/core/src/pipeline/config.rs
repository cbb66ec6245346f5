use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::cluster::{Algorithm, ElbowConfig, HdbscanParams};
use crate::corpus::CorpusFormat;
use crate::encode::{FetchConfig, TfidfConfig};

/// Environment variables that replace path-like settings.
pub const ENV_OVERRIDES: &[&str] = &[
    "THEMES_CORPUS_PATH",
    "THEMES_ALLOWLIST_PATH",
    "THEMES_EMBEDDINGS_PATH",
    "THEMES_ENCODER_ENDPOINT",
    "THEMES_SRL_PATH",
    "THEMES_COREF_PATH",
    "THEMES_LEMMA_PATH",
];

/// A full pipeline configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusSection,
    #[serde(default)]
    pub tags: TagsSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub represent: RepresentSection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub report: ReportSection,
    /// Directory relative paths are resolved against. Not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<CorpusFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TagsSection {
    pub min_support: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allowlist: Option<PathBuf>,
}

impl Default for TagsSection {
    fn default() -> Self {
        Self { min_support: 1, allowlist: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self { ratio: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    #[default]
    Sentence,
    Srl,
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sentence => "sentence",
            Self::Srl => "srl",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepresentSection {
    pub max_n: usize,
    pub mode: Representation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub srl_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coref_path: Option<PathBuf>,
    /// Replaces the built-in lemma table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma_path: Option<PathBuf>,
}

impl Default for RepresentSection {
    fn default() -> Self {
        Self { max_n: 5, mode: Representation::Sentence, srl_path: None, coref_path: None, lemma_path: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    #[default]
    Tfidf,
    EmbeddingFile,
    Endpoint,
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Tfidf => "tfidf",
            Self::EmbeddingFile => "embedding-file",
            Self::Endpoint => "endpoint",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub kind: EncoderKind,
    /// Label recorded in manifests, e.g. the model that produced an
    /// embedding file. Defaults to the kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub tfidf: TfidfConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_file: Option<EmbeddingFileSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointSection>,
}

impl EncoderSection {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingFileSection {
    /// EMB1 file keyed by unit id.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub url: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub max_retries: Option<usize>,
    #[serde(default)]
    pub max_in_flight: Option<usize>,
    #[serde(default)]
    pub retry_backoff_ms: Option<u64>,
}

fn default_timeout() -> u64 {
    30
}

impl EndpointSection {
    pub fn fetch_config(&self) -> FetchConfig {
        let d = FetchConfig::default();
        FetchConfig {
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_retries: self.max_retries.unwrap_or(d.max_retries),
            max_in_flight: self.max_in_flight.unwrap_or(d.max_in_flight),
            retry_backoff_ms: self.retry_backoff_ms.unwrap_or(d.retry_backoff_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub kmeans: KMeansSection,
    pub hdbscan: HdbscanParams,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self { algorithm: Algorithm::Kmeans, seed: 0, kmeans: KMeansSection::default(), hdbscan: HdbscanParams::default() }
    }
}

/// Fixed `k`, or an elbow search when `elbow` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elbow: Option<ElbowConfig>,
}

/// Used when neither `k` nor `elbow` is given.
pub const DEFAULT_K: usize = 700;

impl Default for KMeansSection {
    fn default() -> Self {
        let p = crate::cluster::KMeansParams::default();
        Self { k: None, max_iter: p.max_iter, tol: p.tol, restarts: p.restarts, elbow: None }
    }
}

impl KMeansSection {
    pub fn params(&self) -> crate::cluster::KMeansParams {
        crate::cluster::KMeansParams { max_iter: self.max_iter, tol: self.tol, restarts: self.restarts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub top_m: usize,
    pub top_n: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { top_m: 5, top_n: 3 }
    }
}

impl RunConfig {
    /// Reads, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Applies the [`ENV_OVERRIDES`] found by `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let get = |k: &str| lookup(k).filter(|v| !v.is_empty());
        if let Some(v) = get("THEMES_CORPUS_PATH") {
            self.corpus.path = v.into();
        }
        if let Some(v) = get("THEMES_ALLOWLIST_PATH") {
            self.tags.allowlist = Some(v.into());
        }
        if let Some(v) = get("THEMES_EMBEDDINGS_PATH") {
            self.encoder.embedding_file = Some(EmbeddingFileSection { path: v.into() });
        }
        if let Some(v) = get("THEMES_ENCODER_ENDPOINT") {
            match &mut self.encoder.endpoint {
                Some(e) => e.url = v,
                None => {
                    self.encoder.endpoint = Some(EndpointSection {
                        url: v,
                        timeout_secs: default_timeout(),
                        batch_size: None,
                        max_retries: None,
                        max_in_flight: None,
                        retry_backoff_ms: None,
                    })
                }
            }
        }
        if let Some(v) = get("THEMES_SRL_PATH") {
            self.represent.srl_path = Some(v.into());
        }
        if let Some(v) = get("THEMES_COREF_PATH") {
            self.represent.coref_path = Some(v.into());
        }
        if let Some(v) = get("THEMES_LEMMA_PATH") {
            self.represent.lemma_path = Some(v.into());
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return fail("split.ratio must lie strictly between 0 and 1");
        }
        if self.tags.min_support == 0 {
            return fail("tags.min_support must be at least 1");
        }
        if !(1..=5).contains(&self.represent.max_n) {
            return fail("represent.max_n must be between 1 and 5");
        }
        if self.represent.mode == Representation::Srl && self.represent.srl_path.is_none() {
            return fail("represent.mode = \"srl\" requires represent.srl_path");
        }
        if self.corpus.format.is_none() && CorpusFormat::from_path(&self.corpus.path).is_none() {
            return fail("corpus.format is required when the extension is not .jsonl or .csv");
        }
        match self.encoder.kind {
            EncoderKind::Tfidf => {
                let t = &self.encoder.tfidf;
                if t.ngram_min == 0 || t.ngram_max < t.ngram_min || t.min_df == 0 {
                    return fail("encoder.tfidf needs 1 <= ngram_min <= ngram_max and min_df >= 1");
                }
            }
            EncoderKind::EmbeddingFile if self.encoder.embedding_file.is_none() => {
                return fail("encoder.kind = \"embedding-file\" requires [encoder.embedding_file]");
            }
            EncoderKind::Endpoint => match &self.encoder.endpoint {
                None => return fail("encoder.kind = \"endpoint\" requires [encoder.endpoint]"),
                Some(e) if e.fetch_config().batch_size == 0 || e.fetch_config().max_in_flight == 0 => {
                    return fail("encoder.endpoint batch_size and max_in_flight must be at least 1");
                }
                Some(_) => {}
            },
            EncoderKind::EmbeddingFile => {}
        }
        let km = &self.cluster.kmeans;
        if km.k.is_some() && km.elbow.is_some() {
            return fail("cluster.kmeans.k and cluster.kmeans.elbow are mutually exclusive");
        }
        if km.k == Some(0) || km.max_iter == 0 || km.restarts == 0 || km.tol.is_nan() || km.tol < 0.0 {
            return fail("cluster.kmeans needs k >= 1, max_iter >= 1, restarts >= 1 and tol >= 0");
        }
        if let Some(e) = &km.elbow {
            if e.trials == 0 || e.grid().len() < 3 {
                return fail("cluster.kmeans.elbow needs at least 3 grid points and 1 trial");
            }
        }
        let h = &self.cluster.hdbscan;
        if h.min_cluster_size < 2 || h.min_samples == 0 {
            return fail("cluster.hdbscan needs min_cluster_size >= 2 and min_samples >= 1");
        }
        if self.report.top_m == 0 || self.report.top_n == 0 {
            return fail("report.top_m and report.top_n must be at least 1");
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() { path.to_path_buf() } else { self.base_dir.join(path) }
    }

    pub fn corpus_format(&self) -> CorpusFormat {
        self.corpus.format.or_else(|| CorpusFormat::from_path(&self.corpus.path)).unwrap_or(CorpusFormat::Jsonl)
    }

    /// Replaces both the split and the clustering seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.cluster.seed = seed;
    }

    /// The effective `k` for a fixed-k KMeans run.
    pub fn kmeans_k(&self) -> usize {
        self.cluster.kmeans.k.unwrap_or(DEFAULT_K)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
