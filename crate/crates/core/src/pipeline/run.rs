use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::{sha256_file, stage_key, CacheEntry, StageCache};
use super::compare::compare_runs;
use super::config::{EncoderKind, Representation, RunConfig};
use super::{PipelineError, Stage, StageFailure};
use crate::cluster::{elbow_select, hdbscan_fit, kmeans_fit_best, Algorithm, ClusterModel};
use crate::corpus::{
    extract_sentence_units, load_allowlist, load_corpus, read_jsonl_items, select_tags, sentence_id, split_train_test,
    strip_markup, write_jsonl, Question, SentenceUnit,
};
use crate::encode::{
    fit_tfidf, l2_normalize, load_embeddings, load_sparse, save_embeddings, save_sparse, EmbeddingFetcher,
    HttpTransport, TfidfModel,
};
use crate::evaluate::{build_report, cluster_exemplars, exemplars_markdown, Classifier, EvalReport};
use crate::represent::{
    load_coref, load_srl, reduce_sentence, resolve_pronouns, CorefChain, Lemmatizer, RuleSegmenter, Segmenter, SrlParse,
};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Wall-clock timings and cache hits; kept apart so the manifest is byte-stable.
pub const RUN_LOG_FILE: &str = "run_log.json";

const TRAIN_UNITS: &str = "train_units.jsonl";
const TEST_UNITS: &str = "test_units.jsonl";
const TRAIN_VECTORS: &str = "train.vec";
const TEST_VECTORS: &str = "test.vec";
const MODEL: &str = "model.bin";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Defaults to `{out_dir}/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Size of the worker pool; the global pool when `None`.
    pub workers: Option<usize>,
    /// Last stage to run.
    pub stop_after: Stage,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), cache_dir: None, workers: None, stop_after: Stage::Evaluate }
    }

    fn cache(&self) -> StageCache {
        StageCache::new(self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache")))
    }
}

/// The axes a run is compared on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabels {
    pub encoder: String,
    pub clusterer: Algorithm,
    pub representation: Representation,
    pub max_n: usize,
    /// Number of clusters, once the cluster stage has run.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub key: String,
    /// Content hashes of files read from outside the cache.
    pub inputs: BTreeMap<String, String>,
    /// Artifact name to content hash.
    pub artifacts: BTreeMap<String, String>,
}

/// Everything needed to reproduce and audit a run. Contains no timings or
/// absolute paths, so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub labels: RunLabels,
    pub seeds: BTreeMap<String, u64>,
    /// Hash of the train/test assignment; runs are comparable only when equal.
    pub split_hash: String,
    pub stages: Vec<StageRecord>,
    /// Output files relative to the run directory.
    pub outputs: Vec<String>,
    pub micro_f1: Option<f64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Compare(format!("{}: {e}", path.display())))
    }

    /// Short identifier, e.g. `tfidf-sentence-n4-kmeans`.
    pub fn label(&self) -> String {
        let l = &self.labels;
        format!("{}-{}-n{}-{}", l.encoder, l.representation, l.max_n, l.clusterer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u128,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub report: Option<EvalReport>,
    pub log: RunLog,
    pub out_dir: PathBuf,
}

/// Extension for attaching the failing stage to module errors.
trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<StageFailure>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::Stage { stage, source: e.into() })
    }
}

fn data(stage: Stage, message: impl Into<String>) -> PipelineError {
    PipelineError::Stage { stage, source: StageFailure::Data(message.into()) }
}

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(path, body).map_err(|e| PipelineError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Internal(e.to_string()))?;
    text.push('\n');
    write_file(path, text)
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config serializes")
}

/// Runs the configured pipeline up to `options.stop_after`.
pub fn run_pipeline(config: &RunConfig, options: &RunOptions) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| PipelineError::Internal(e.to_string()))?
            .install(|| Runner::new(config, options).run()),
        None => Runner::new(config, options).run(),
    }
}

struct Runner<'a> {
    config: &'a RunConfig,
    options: &'a RunOptions,
    cache: StageCache,
    records: Vec<StageRecord>,
    log: RunLog,
    outputs: Vec<String>,
}

impl<'a> Runner<'a> {
    fn new(config: &'a RunConfig, options: &'a RunOptions) -> Self {
        Self { config, options, cache: options.cache(), records: Vec::new(), log: RunLog::default(), outputs: Vec::new() }
    }

    fn run(mut self) -> Result<RunOutcome, PipelineError> {
        let out = &self.options.out_dir;
        fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
        let stop = self.options.stop_after;
        let cfg = self.config;
        let mut labels = RunLabels {
            encoder: cfg.encoder.label(),
            clusterer: cfg.cluster.algorithm,
            representation: cfg.represent.mode,
            max_n: cfg.represent.max_n,
            k: None,
        };

        let ingest = self.stage(Stage::Ingest, |r| r.ingest())?;
        let split_hash = ingest.hash("split.jsonl")?.to_string();
        let mut report = None;
        if stop >= Stage::Represent {
            let represent = self.stage(Stage::Represent, |r| r.represent(&ingest))?;
            if stop >= Stage::Encode {
                let encode = self.stage(Stage::Encode, |r| r.encode(&represent))?;
                if stop >= Stage::Cluster {
                    let cluster = self.stage(Stage::Cluster, |r| r.cluster(&encode))?;
                    let model = ClusterModel::load(&cluster.path(MODEL)).at(Stage::Cluster)?;
                    labels.k = Some(model.k());
                    if stop >= Stage::Evaluate {
                        let evaluate =
                            self.stage(Stage::Evaluate, |r| r.evaluate(&ingest, &represent, &encode, &cluster))?;
                        let text = fs::read_to_string(evaluate.path("report.json"))
                            .map_err(|e| PipelineError::io(&evaluate.path("report.json"), e))?;
                        report = Some(
                            serde_json::from_str::<EvalReport>(&text).map_err(|e| PipelineError::Internal(e.to_string()))?,
                        );
                    }
                }
            }
        }

        let manifest = RunManifest {
            config: cfg.clone(),
            labels,
            seeds: BTreeMap::from([("cluster".to_string(), cfg.cluster.seed), ("split".to_string(), cfg.split.seed)]),
            split_hash,
            stages: self.records,
            outputs: self.outputs,
            micro_f1: report.as_ref().map(|r: &EvalReport| r.micro_f1),
        };
        write_json(&out.join(MANIFEST_FILE), &manifest)?;
        write_json(&out.join(RUN_LOG_FILE), &self.log)?;
        Ok(RunOutcome { manifest, report, log: self.log, out_dir: out.clone() })
    }

    /// Computes (or reuses) a stage and copies its artifacts to `{out}/{stage}/`.
    fn stage(
        &mut self,
        stage: Stage,
        plan: impl FnOnce(&Self) -> Result<StagePlan, PipelineError>,
    ) -> Result<CacheEntry, PipelineError> {
        let started = Instant::now();
        let _span = tracing::info_span!("stage", name = %stage).entered();
        let StagePlan { config, inputs, build } = plan(self)?;
        let key = stage_key(stage, &config, &inputs);
        let entry = self.cache.get_or_build(stage, &key, build)?;

        let dest = self.options.out_dir.join(stage.name());
        if dest.exists() {
            fs::remove_dir_all(&dest).map_err(|e| PipelineError::io(&dest, e))?;
        }
        fs::create_dir_all(&dest).map_err(|e| PipelineError::io(&dest, e))?;
        for name in entry.files.keys() {
            fs::copy(entry.path(name), dest.join(name)).map_err(|e| PipelineError::io(&dest.join(name), e))?;
            self.outputs.push(format!("{stage}/{name}"));
        }
        let elapsed: Duration = started.elapsed();
        tracing::info!(stage = %stage, cached = entry.hit, millis = elapsed.as_millis() as u64, "stage done");
        self.log.timings.push(StageTiming { stage: stage.to_string(), millis: elapsed.as_millis(), cache_hit: entry.hit });
        self.records.push(StageRecord {
            stage: stage.to_string(),
            key: key.clone(),
            inputs: inputs.into_iter().filter(|(k, _)| !k.starts_with("upstream:")).collect(),
            artifacts: entry.files.clone(),
        });
        Ok(entry)
    }

    fn ingest(&self) -> Result<StagePlan, PipelineError> {
        let cfg = self.config;
        let corpus_path = cfg.resolve(&cfg.corpus.path);
        let format = cfg.corpus_format();
        let allowlist = cfg.tags.allowlist.as_ref().map(|p| cfg.resolve(p));
        let mut inputs = BTreeMap::from([("corpus".to_string(), input_hash(Stage::Ingest, &corpus_path)?)]);
        if let Some(p) = &allowlist {
            inputs.insert("allowlist".to_string(), input_hash(Stage::Ingest, p)?);
        }
        let config = serde_json::json!({
            "format": format,
            "min_support": cfg.tags.min_support,
            "ratio": cfg.split.ratio,
            "seed": cfg.split.seed,
        });
        let (min_support, ratio, seed) = (cfg.tags.min_support, cfg.split.ratio, cfg.split.seed);
        Ok(StagePlan::new(config, inputs, move |dir| {
            let st = Stage::Ingest;
            let corpus = load_corpus(&corpus_path, format).at(st)?;
            let allow = allowlist.as_deref().map(load_allowlist).transpose().at(st)?;
            let tagset = select_tags(&corpus, min_support, allow.as_deref()).at(st)?;
            let split = split_train_test(&corpus, &tagset, ratio, seed).at(st)?;
            tracing::info!(questions = corpus.len(), tags = tagset.len(), train = split.train.len(), test = split.test.len(), "ingested");
            split.write_manifest(&dir.join("split.jsonl")).at(st)?;
            write_jsonl(&dir.join("train.jsonl"), &split.train).at(st)?;
            write_jsonl(&dir.join("test.jsonl"), &split.test).at(st)?;
            write_json(&dir.join("tags.json"), &tagset)
        }))
    }

    fn represent(&self, ingest: &CacheEntry) -> Result<StagePlan, PipelineError> {
        let cfg = self.config;
        let st = Stage::Represent;
        let mut inputs = upstream(ingest, &["train.jsonl", "test.jsonl"])?;
        let rep = &cfg.represent;
        let srl = match rep.mode {
            Representation::Sentence => None,
            Representation::Srl => {
                let srl_path = cfg.resolve(rep.srl_path.as_ref().expect("validated"));
                inputs.insert("srl".to_string(), input_hash(st, &srl_path)?);
                let coref_path = rep.coref_path.as_ref().map(|p| cfg.resolve(p));
                if let Some(p) = &coref_path {
                    inputs.insert("coref".to_string(), input_hash(st, p)?);
                }
                let lemma_path = rep.lemma_path.as_ref().map(|p| cfg.resolve(p));
                if let Some(p) = &lemma_path {
                    inputs.insert("lemma".to_string(), input_hash(st, p)?);
                }
                Some((srl_path, coref_path, lemma_path))
            }
        };
        let config = serde_json::json!({ "max_n": rep.max_n, "mode": rep.mode });
        let max_n = rep.max_n;
        let (train_path, test_path) = (ingest.path("train.jsonl"), ingest.path("test.jsonl"));
        Ok(StagePlan::new(config, inputs, move |dir| {
            let train: Vec<Question> = read_jsonl_items(&train_path).at(st)?;
            let test: Vec<Question> = read_jsonl_items(&test_path).at(st)?;
            let segmenter = RuleSegmenter::default();
            let (train_units, test_units) = match &srl {
                None => (
                    extract_sentence_units(&train, &segmenter, max_n).at(st)?,
                    extract_sentence_units(&test, &segmenter, max_n).at(st)?,
                ),
                Some((srl_path, coref_path, lemma_path)) => {
                    let srl = SrlInputs::load(srl_path, coref_path.as_deref(), lemma_path.as_deref())?;
                    (srl.units(&train, &segmenter, max_n)?, srl.units(&test, &segmenter, max_n)?)
                }
            };
            tracing::info!(train = train_units.len(), test = test_units.len(), "units extracted");
            write_jsonl(&dir.join(TRAIN_UNITS), &train_units).at(st)?;
            write_jsonl(&dir.join(TEST_UNITS), &test_units).at(st)
        }))
    }

    fn encode(&self, represent: &CacheEntry) -> Result<StagePlan, PipelineError> {
        let cfg = self.config;
        let st = Stage::Encode;
        let enc = cfg.encoder.clone();
        let mut inputs = upstream(represent, &[TRAIN_UNITS, TEST_UNITS])?;
        let mut config = serde_json::json!({ "kind": enc.kind });
        let embedding_path = match enc.kind {
            EncoderKind::Tfidf => {
                config["tfidf"] = json(&enc.tfidf);
                None
            }
            EncoderKind::EmbeddingFile => {
                let path = cfg.resolve(&enc.embedding_file.as_ref().expect("validated").path);
                inputs.insert("embeddings".to_string(), input_hash(st, &path)?);
                Some(path)
            }
            EncoderKind::Endpoint => {
                let e = enc.endpoint.as_ref().expect("validated");
                config["endpoint"] = serde_json::json!({ "url": e.url, "name": enc.name });
                None
            }
        };
        let (train_path, test_path) = (represent.path(TRAIN_UNITS), represent.path(TEST_UNITS));
        Ok(StagePlan::new(config, inputs, move |dir| {
            let train: Vec<SentenceUnit> = read_jsonl_items(&train_path).at(st)?;
            let test: Vec<SentenceUnit> = read_jsonl_items(&test_path).at(st)?;
            let (train_ids, train_texts) = ids_and_texts(&train);
            let (test_ids, test_texts) = ids_and_texts(&test);
            let (mut train_set, mut test_set) = match enc.kind {
                EncoderKind::Tfidf => {
                    let model = fit_tfidf(&train_texts, &enc.tfidf).at(st)?;
                    write_json(&dir.join("tfidf.json"), &TfidfSummary::of(&model))?;
                    (model.transform_all(train_ids, &train_texts).at(st)?, model.transform_all(test_ids, &test_texts).at(st)?)
                }
                EncoderKind::EmbeddingFile => {
                    let all = load_embeddings(embedding_path.as_deref().expect("set above")).at(st)?;
                    (all.subset_by_ids(&train_ids).at(st)?, all.subset_by_ids(&test_ids).at(st)?)
                }
                EncoderKind::Endpoint => {
                    let e = enc.endpoint.as_ref().expect("validated");
                    let transport = HttpTransport::new(e.url.clone(), Duration::from_secs(e.timeout_secs));
                    let fetcher = EmbeddingFetcher::new(transport, e.fetch_config());
                    let train_set = fetcher.fetch(train_ids, &train_texts).at(st)?;
                    (train_set, fetcher.fetch(test_ids, &test_texts).at(st)?)
                }
            };
            let train_zero = l2_normalize(&mut train_set);
            let test_zero = l2_normalize(&mut test_set);
            if train_set.dim() != test_set.dim() && !test_set.is_empty() {
                return Err(data(st, "train and test vectors differ in dimension"));
            }
            if train_zero > 0 || test_zero > 0 {
                tracing::warn!(train_zero, test_zero, "zero vectors: excluded from clustering, skipped at prediction");
            }
            let stats = serde_json::json!({
                "encoder": enc.label(),
                "dim": train_set.dim(),
                "sparse": train_set.is_sparse(),
                "train": train_set.len(),
                "test": test_set.len(),
                "train_zero": train_zero,
                "test_zero": test_zero,
            });
            write_json(&dir.join("encode.json"), &stats)?;
            if train_set.is_sparse() {
                save_sparse(&dir.join(TRAIN_VECTORS), &train_set).at(st)?;
                save_sparse(&dir.join(TEST_VECTORS), &test_set).at(st)
            } else {
                save_embeddings(&dir.join(TRAIN_VECTORS), &train_set).at(st)?;
                save_embeddings(&dir.join(TEST_VECTORS), &test_set).at(st)
            }
        }))
    }

    fn cluster(&self, encode: &CacheEntry) -> Result<StagePlan, PipelineError> {
        let cfg = self.config;
        let st = Stage::Cluster;
        let inputs = upstream(encode, &[TRAIN_VECTORS])?;
        let c = cfg.cluster.clone();
        let config = match c.algorithm {
            Algorithm::Kmeans => serde_json::json!({
                "algorithm": c.algorithm,
                "seed": c.seed,
                "kmeans": json(&c.kmeans.params()),
                "k": c.kmeans.elbow.is_none().then(|| cfg.kmeans_k()),
                "elbow": c.kmeans.elbow,
            }),
            Algorithm::Hdbscan => serde_json::json!({ "algorithm": c.algorithm, "hdbscan": json(&c.hdbscan) }),
        };
        let fixed_k = cfg.kmeans_k();
        let path = encode.path(TRAIN_VECTORS);
        Ok(StagePlan::new(config, inputs, move |dir| {
            let all = load_sparse(&path).at(st)?;
            let vectors = all.select(|i| !all.row(i).is_zero());
            if vectors.is_empty() {
                return Err(data(st, "every training vector is zero"));
            }
            tracing::info!(points = vectors.len(), excluded = all.len() - vectors.len(), dim = vectors.dim(), "clustering");
            let model = match c.algorithm {
                Algorithm::Kmeans => {
                    let params = c.kmeans.params();
                    let k = match &c.kmeans.elbow {
                        Some(elbow) => {
                            let result = elbow_select(&vectors, elbow, &params, c.seed).at(st)?;
                            tracing::info!(chosen_k = result.chosen_k, inflections = ?result.inflections, "elbow");
                            write_json(&dir.join("elbow.json"), &result)?;
                            result.chosen_k
                        }
                        None => fixed_k,
                    };
                    ClusterModel::from_kmeans(&kmeans_fit_best(&vectors, k, c.seed, &params).at(st)?, &params)
                }
                Algorithm::Hdbscan => {
                    let fitted = hdbscan_fit(&vectors, &c.hdbscan).at(st)?;
                    if fitted.n_clusters == 0 {
                        tracing::warn!("no clusters found; every test question will abstain");
                    }
                    ClusterModel::from_hdbscan(&fitted, vectors.dim(), c.seed)
                }
            };
            model.save(&dir.join(MODEL)).at(st)?;
            write_json(&dir.join("summary.json"), &model.summary())
        }))
    }

    fn evaluate(
        &self,
        ingest: &CacheEntry,
        represent: &CacheEntry,
        encode: &CacheEntry,
        cluster: &CacheEntry,
    ) -> Result<StagePlan, PipelineError> {
        let st = Stage::Evaluate;
        let mut inputs = upstream(ingest, &["test.jsonl"])?;
        inputs.extend(upstream(represent, &[TRAIN_UNITS, TEST_UNITS])?);
        inputs.extend(upstream(encode, &[TRAIN_VECTORS, TEST_VECTORS])?);
        inputs.extend(upstream(cluster, &[MODEL])?);
        let report_cfg = self.config.report.clone();
        let config = json(&report_cfg);
        let paths = (
            ingest.path("test.jsonl"),
            represent.path(TRAIN_UNITS),
            represent.path(TEST_UNITS),
            encode.path(TRAIN_VECTORS),
            encode.path(TEST_VECTORS),
            cluster.path(MODEL),
        );
        Ok(StagePlan::new(config, inputs, move |dir| {
            let (test_q, train_u, test_u, train_v, test_v, model_path) = paths;
            let questions: Vec<Question> = read_jsonl_items(&test_q).at(st)?;
            let train_units: Vec<SentenceUnit> = read_jsonl_items(&train_u).at(st)?;
            let test_units: Vec<SentenceUnit> = read_jsonl_items(&test_u).at(st)?;
            let train_vectors = load_sparse(&train_v).at(st)?;
            let test_vectors = load_sparse(&test_v).at(st)?;
            let model = ClusterModel::load(&model_path).at(st)?;

            let train_by_id: HashMap<&str, &SentenceUnit> =
                train_units.iter().map(|u| (u.sentence_id.as_str(), u)).collect();
            let unit_tags = model
                .ids
                .iter()
                .map(|id| train_by_id.get(id.as_str()).map(|u| u.tags.clone()))
                .collect::<Option<Vec<BTreeSet<String>>>>()
                .ok_or_else(|| data(st, "model references a sentence missing from the training units"))?;
            let classifier = Classifier::new(&model, &unit_tags);

            let row_of: HashMap<&str, usize> =
                test_vectors.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
            let mut units_of: HashMap<&str, Vec<usize>> = HashMap::new();
            for unit in &test_units {
                let row = *row_of
                    .get(unit.sentence_id.as_str())
                    .ok_or_else(|| data(st, format!("no vector for test unit `{}`", unit.sentence_id)))?;
                units_of.entry(unit.question_id.as_str()).or_default().push(row);
            }
            let gold = questions
                .iter()
                .map(|q| match q.tags.iter().next() {
                    Some(t) if q.tags.len() == 1 => Ok(t.clone()),
                    _ => Err(data(st, format!("test question `{}` is not single-tag", q.id))),
                })
                .collect::<Result<Vec<String>, _>>()?;
            let predictions: Vec<_> = questions
                .par_iter()
                .map(|q| {
                    let rows: Vec<_> =
                        units_of.get(q.id.as_str()).map(|r| r.iter().map(|&i| test_vectors.row(i)).collect()).unwrap_or_default();
                    classifier.predict(&q.id, &rows)
                })
                .collect();
            let report = build_report(&predictions, &gold, report_cfg.top_m).at(st)?;
            tracing::info!(micro_f1 = report.micro_f1, abstained = report.abstained, "evaluated");
            write_file(&dir.join("report.json"), report.to_json())?;
            write_file(&dir.join("report.txt"), report.render_text())?;
            write_file(&dir.join("confusion.csv"), report.confusion.to_csv())?;

            let texts: HashMap<String, String> =
                train_units.iter().map(|u| (u.sentence_id.clone(), u.text.clone())).collect();
            let members = train_vectors.subset_by_ids(&model.ids).at(st)?;
            let exemplars =
                cluster_exemplars(&model, &members, &texts, &classifier.distributions, report_cfg.top_n).at(st)?;
            write_file(&dir.join("exemplars.md"), exemplars_markdown(&exemplars))
        }))
    }
}

type BuildFn = Box<dyn FnOnce(&Path) -> Result<(), PipelineError>>;

/// What a stage hashes and how it builds its artifacts into a directory.
struct StagePlan {
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    build: BuildFn,
}

impl StagePlan {
    fn new(
        config: serde_json::Value,
        inputs: BTreeMap<String, String>,
        build: impl FnOnce(&Path) -> Result<(), PipelineError> + 'static,
    ) -> Self {
        Self { config, inputs, build: Box::new(build) }
    }
}

fn ids_and_texts(units: &[SentenceUnit]) -> (Vec<String>, Vec<String>) {
    units.iter().map(|u| (u.sentence_id.clone(), u.text.clone())).unzip()
}

fn input_hash(stage: Stage, path: &Path) -> Result<String, PipelineError> {
    if !path.is_file() {
        return Err(data(stage, format!("input file {} not found", path.display())));
    }
    sha256_file(path)
}

/// Hashes of upstream artifacts, namespaced so they stay out of the manifest's input list.
fn upstream(entry: &CacheEntry, names: &[&str]) -> Result<BTreeMap<String, String>, PipelineError> {
    names
        .iter()
        .map(|n| Ok((format!("upstream:{}/{n}", entry.stage), entry.hash(n)?.to_string())))
        .collect()
}

#[derive(Serialize)]
struct TfidfSummary<'a> {
    config: &'a crate::encode::TfidfConfig,
    n_documents: usize,
    vocabulary_size: usize,
    vocabulary: &'a BTreeMap<String, u32>,
    idf: &'a [f64],
}

impl<'a> TfidfSummary<'a> {
    fn of(model: &'a TfidfModel) -> Self {
        Self {
            config: &model.config,
            n_documents: model.n_documents,
            vocabulary_size: model.dim(),
            vocabulary: &model.vocabulary,
            idf: &model.idf,
        }
    }
}

/// Annotations for the parse track.
struct SrlInputs {
    parses: HashMap<String, Vec<SrlParse>>,
    chains: HashMap<String, Vec<CorefChain>>,
    lemmatizer: Lemmatizer,
}

impl SrlInputs {
    fn load(srl: &Path, coref: Option<&Path>, lemma: Option<&Path>) -> Result<Self, PipelineError> {
        let st = Stage::Represent;
        let mut parses: HashMap<String, Vec<SrlParse>> = HashMap::new();
        for p in load_srl(srl).at(st)? {
            parses.entry(p.sentence_id.clone()).or_default().push(p);
        }
        let chains = match coref {
            Some(path) => load_coref(path).at(st)?.into_iter().map(|d| (d.question_id, d.chains)).collect(),
            None => HashMap::new(),
        };
        let lemmatizer = match lemma {
            Some(path) => Lemmatizer::from_tsv_file(path).at(st)?,
            None => Lemmatizer::builtin(),
        };
        Ok(Self { parses, chains, lemmatizer })
    }

    /// Segment, rewrite pronouns across the whole question, keep the first
    /// `max_n` sentences, then reduce each sentence's parses. A sentence's
    /// k-th reduced string gets the id `{sentence_id}/{k}`.
    fn units(&self, questions: &[Question], segmenter: &RuleSegmenter, max_n: usize) -> Result<Vec<SentenceUnit>, PipelineError> {
        let st = Stage::Represent;
        let per_question = questions
            .par_iter()
            .map(|q| {
                let sentences = segmenter.segment(&strip_markup(&q.body));
                let sentences = match self.chains.get(&q.id) {
                    Some(chains) => resolve_pronouns(&q.id, &sentences, chains).at(st)?,
                    None => sentences,
                };
                let mut units = Vec::new();
                let mut mismatched = 0usize;
                for (position, sentence) in sentences.iter().take(max_n).enumerate() {
                    let sid = sentence_id(&q.id, position);
                    let Some(parses) = self.parses.get(&sid) else { continue };
                    mismatched += parses.iter().filter(|p| p.source_text.as_ref().is_some_and(|t| t != sentence)).count();
                    for (k, reduced) in reduce_sentence(parses.clone(), &self.lemmatizer).into_iter().enumerate() {
                        units.push(SentenceUnit {
                            sentence_id: format!("{sid}/{k}"),
                            question_id: q.id.clone(),
                            position,
                            text: reduced.text,
                            tags: q.tags.clone(),
                        });
                    }
                }
                Ok((units, mismatched))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let mismatched: usize = per_question.iter().map(|(_, m)| m).sum();
        if mismatched > 0 {
            tracing::warn!(mismatched, "parses whose source text differs from the segmented sentence");
        }
        Ok(per_question.into_iter().flat_map(|(u, _)| u).collect())
    }
}

/// Runs every `max_n` in 1..=5 with both clusterers, each into
/// `{out}/{label}/` with a shared cache, and writes `comparison.txt` and
/// `comparison.csv` to `{out}`.
pub fn run_grid(config: &RunConfig, options: &RunOptions) -> Result<Vec<RunOutcome>, PipelineError> {
    let cache_dir = options.cache_dir.clone().unwrap_or_else(|| options.out_dir.join("cache"));
    let mut outcomes = Vec::new();
    for max_n in 1..=5 {
        for algorithm in [Algorithm::Kmeans, Algorithm::Hdbscan] {
            let mut cfg = config.clone();
            cfg.represent.max_n = max_n;
            cfg.cluster.algorithm = algorithm;
            let label = format!("{}-{}-n{max_n}-{algorithm}", cfg.encoder.label(), cfg.represent.mode);
            tracing::info!(run = %label, "grid run");
            let opts = RunOptions {
                out_dir: options.out_dir.join(&label),
                cache_dir: Some(cache_dir.clone()),
                workers: options.workers,
                stop_after: Stage::Evaluate,
            };
            outcomes.push(run_pipeline(&cfg, &opts)?);
        }
    }
    let manifests: Vec<RunManifest> = outcomes.iter().map(|o| o.manifest.clone()).collect();
    let comparison = compare_runs(&manifests)?;
    write_file(&options.out_dir.join("comparison.txt"), comparison.render_text())?;
    write_file(&options.out_dir.join("comparison.csv"), comparison.to_csv())?;
    Ok(outcomes)
}
