use std::fs;
use std::path::{Path, PathBuf};

use theme_core::corpus::write_jsonl;
use theme_core::pipeline::{compare_runs, run_pipeline, PipelineError, RunConfig, RunOptions, Stage, MANIFEST_FILE};
use theme_core::synthetic::separability_corpus;

fn setup(dir: &Path, extra: &str) -> RunConfig {
    write_jsonl(&dir.join("corpus.jsonl"), &separability_corpus(40, 11)).unwrap();
    let text = format!(
        "[corpus]\npath = \"corpus.jsonl\"\n[split]\nseed = 5\n[cluster]\nseed = 9\n[cluster.kmeans]\nk = 20\n{extra}"
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    RunConfig::load(&path).unwrap()
}

fn options(out: PathBuf) -> RunOptions {
    RunOptions { workers: Some(2), ..RunOptions::new(out) }
}

#[test]
fn full_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), "");
    let out = tmp.path().join("out");
    let run = run_pipeline(&cfg, &options(out.clone())).unwrap();
    let report = run.report.unwrap();
    assert!(report.micro_f1 > 0.8, "micro_f1 {}", report.micro_f1);
    assert_eq!(run.manifest.labels.k, Some(20));
    for file in [
        "ingest/split.jsonl",
        "represent/train_units.jsonl",
        "encode/train.vec",
        "encode/tfidf.json",
        "cluster/model.bin",
        "cluster/summary.json",
        "evaluate/report.json",
        "evaluate/report.txt",
        "evaluate/confusion.csv",
        "evaluate/exemplars.md",
        MANIFEST_FILE,
        "run_log.json",
    ] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
}

#[test]
fn rerun_hits_the_cache_and_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), "");
    let first = run_pipeline(&cfg, &options(tmp.path().join("a"))).unwrap();
    let second = run_pipeline(&cfg, &options(tmp.path().join("a"))).unwrap();
    assert!(first.log.timings.iter().all(|t| !t.cache_hit));
    assert!(second.log.timings.iter().all(|t| t.cache_hit));
    assert_eq!(first.manifest, second.manifest);

    // A separate cache must still give byte-identical artifacts.
    let fresh = run_pipeline(&cfg, &options(tmp.path().join("b"))).unwrap();
    assert!(fresh.log.timings.iter().all(|t| !t.cache_hit));
    for f in ["evaluate/report.json", "cluster/model.bin", MANIFEST_FILE] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn changed_input_invalidates_downstream_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), "");
    let out = tmp.path().join("out");
    let before = run_pipeline(&cfg, &options(out.clone())).unwrap();
    write_jsonl(&tmp.path().join("corpus.jsonl"), &separability_corpus(40, 12)).unwrap();
    let after = run_pipeline(&cfg, &options(out)).unwrap();
    assert!(after.log.timings.iter().all(|t| !t.cache_hit));
    for (a, b) in before.manifest.stages.iter().zip(&after.manifest.stages) {
        assert_ne!(a.key, b.key, "{}", a.stage);
    }
}

#[test]
fn tampered_cache_entry_is_recomputed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), "");
    let out = tmp.path().join("out");
    let first = run_pipeline(&cfg, &options(out.clone())).unwrap();
    let cluster_dir = fs::read_dir(out.join("cache"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("cluster-"))
        .unwrap();
    fs::write(cluster_dir.join("summary.json"), "{}").unwrap();
    let second = run_pipeline(&cfg, &options(out)).unwrap();
    let hits: Vec<(String, bool)> = second.log.timings.iter().map(|t| (t.stage.clone(), t.cache_hit)).collect();
    assert_eq!(hits[3], ("cluster".to_string(), false));
    assert!(hits[2].1 && hits[4].1);
    assert_eq!(first.manifest, second.manifest);
}

#[test]
fn stop_after_limits_the_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), "");
    let out = tmp.path().join("out");
    let run = run_pipeline(&cfg, &RunOptions { stop_after: Stage::Encode, ..options(out.clone()) }).unwrap();
    assert_eq!(run.manifest.stages.len(), 3);
    assert!(run.report.is_none() && run.manifest.micro_f1.is_none());
    assert!(!out.join("cluster").exists());
}

#[test]
fn hdbscan_and_elbow_runs_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = setup(tmp.path(), "");
    cfg.cluster.algorithm = theme_core::cluster::Algorithm::Hdbscan;
    let h = run_pipeline(&cfg, &options(tmp.path().join("h"))).unwrap();
    assert!(h.report.is_some());

    let mut cfg = setup(tmp.path(), "");
    cfg.cluster.kmeans.k = None;
    cfg.cluster.kmeans.elbow =
        Some(theme_core::cluster::ElbowConfig { k_start: 2, k_step: 2, k_max: 10, trials: 2 });
    let e = run_pipeline(&cfg, &options(tmp.path().join("e"))).unwrap();
    assert!(tmp.path().join("e/cluster/elbow.json").is_file());
    assert!([4, 6, 8].contains(&e.manifest.labels.k.unwrap()));

    let table = compare_runs(&[h.manifest, e.manifest]).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.rows[0].micro_f1 >= table.rows[1].micro_f1);
}

#[test]
fn compare_rejects_different_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = setup(tmp.path(), "");
    let a = run_pipeline(&cfg, &options(tmp.path().join("a"))).unwrap();
    cfg.override_seed(77);
    let b = run_pipeline(&cfg, &options(tmp.path().join("b"))).unwrap();
    let err = compare_runs(&[a.manifest, b.manifest]).unwrap_err();
    assert!(matches!(err, PipelineError::Compare(_)));
}

#[test]
fn data_errors_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), "");
    let mut too_many = cfg.clone();
    too_many.cluster.kmeans.k = Some(100_000);
    let err = run_pipeline(&too_many, &options(tmp.path().join("x"))).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: Stage::Cluster, .. }), "{err}");
    assert_eq!(err.exit_code(), 2);

    let mut missing = cfg;
    missing.corpus.path = "nope.jsonl".into();
    let err = run_pipeline(&missing, &options(tmp.path().join("y"))).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: Stage::Ingest, .. }), "{err}");
}
