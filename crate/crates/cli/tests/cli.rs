use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use theme_core::corpus::write_jsonl;
use theme_core::synthetic::separability_corpus;

fn themes(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_themes"))
        .args(args)
        .current_dir(dir)
        .env("THEMES_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn workspace(k: usize) -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    write_jsonl(&tmp.path().join("corpus.jsonl"), &separability_corpus(30, 4)).unwrap();
    let config = format!(
        "[corpus]\npath = \"corpus.jsonl\"\n\n[split]\nseed = 3\n\n[cluster]\nseed = 1\n\n[cluster.kmeans]\nk = {k}\n"
    );
    fs::write(tmp.path().join("run.toml"), config).unwrap();
    tmp
}

fn read(dir: &Path, rel: &str) -> Vec<u8> {
    fs::read(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn run_reports_micro_f1_and_reuses_the_cache() {
    let ws = workspace(15);
    let first = themes(&["run", "--config", "run.toml", "--out", "out", "--workers", "2"], ws.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let text = stdout(&first);
    assert!(text.contains("micro_f1"), "{text}");
    assert!(!text.contains("cached"));
    let manifest = read(ws.path(), "out/manifest.json");

    let second = themes(&["run", "--config", "run.toml", "--out", "out"], ws.path());
    assert!(second.status.success());
    assert_eq!(stdout(&second).matches("cached").count(), 5);
    assert_eq!(read(ws.path(), "out/manifest.json"), manifest);
}

#[test]
fn stage_subcommands_stop_early() {
    let ws = workspace(15);
    let o = themes(&["encode", "--config", "run.toml", "--out", "enc"], ws.path());
    assert!(o.status.success());
    assert!(ws.path().join("enc/encode/train.vec").is_file());
    assert!(!ws.path().join("enc/cluster").exists());

    let o = themes(&["run", "--config", "run.toml", "--out", "ing", "--stage", "ingest"], ws.path());
    assert!(o.status.success());
    assert!(ws.path().join("ing/ingest/split.jsonl").is_file());
    assert!(!ws.path().join("ing/represent").exists());
}

#[test]
fn exit_codes_follow_the_error_class() {
    let ws = workspace(15);
    assert_eq!(themes(&["run"], ws.path()).status.code(), Some(1));
    assert_eq!(themes(&["run", "--config", "missing.toml"], ws.path()).status.code(), Some(1));
    assert_eq!(themes(&["run", "--config", "run.toml", "--stage", "train"], ws.path()).status.code(), Some(1));

    fs::write(ws.path().join("typo.toml"), "[corpus]\npath = \"corpus.jsonl\"\n[cluster]\nalgoritm = \"kmeans\"\n").unwrap();
    assert_eq!(themes(&["run", "--config", "typo.toml"], ws.path()).status.code(), Some(1));

    fs::write(ws.path().join("gone.toml"), "[corpus]\npath = \"gone.jsonl\"\n").unwrap();
    let o = themes(&["run", "--config", "gone.toml"], ws.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ingest stage failed"));

    let o = themes(&["run", "--config", "run.toml"], ws.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(themes(&["--help"], ws.path()).status.success());
}

#[test]
fn environment_overrides_the_corpus_path() {
    let ws = workspace(15);
    fs::rename(ws.path().join("corpus.jsonl"), ws.path().join("moved.jsonl")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_themes"))
        .args(["ingest", "--config", "run.toml"])
        .current_dir(ws.path())
        .env("THEMES_CORPUS_PATH", "moved.jsonl")
        .env("THEMES_LOG", "warn")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn compare_ranks_runs_and_guards_the_split() {
    let ws = workspace(15);
    let dir = ws.path();
    assert!(themes(&["run", "--config", "run.toml", "--out", "a"], dir).status.success());
    fs::write(
        dir.join("hdb.toml"),
        "[corpus]\npath = \"corpus.jsonl\"\n[split]\nseed = 3\n[cluster]\nalgorithm = \"hdbscan\"\n",
    )
    .unwrap();
    assert!(themes(&["run", "--config", "hdb.toml", "--out", "b"], dir).status.success());

    let o = themes(&["compare", "a", "b/manifest.json", "--csv", "cmp.csv"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("KMEANS") && text.contains("HDBSCAN"), "{text}");
    let csv = fs::read_to_string(dir.join("cmp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    assert!(themes(&["run", "--config", "run.toml", "--out", "c", "--seed", "99"], dir).status.success());
    let o = themes(&["compare", "a", "c"], dir);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different train/test splits"));
}

#[test]
fn grid_writes_ten_runs_and_a_comparison() {
    let ws = workspace(15);
    let o = themes(&["run", "--grid", "--config", "run.toml", "--out", "grid"], ws.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifests: Vec<PathBuf> = fs::read_dir(ws.path().join("grid"))
        .unwrap()
        .map(|e| e.unwrap().path().join("manifest.json"))
        .filter(|p| p.is_file())
        .collect();
    assert_eq!(manifests.len(), 10);
    let csv = fs::read_to_string(ws.path().join("grid/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(ws.path().join("grid/comparison.txt").is_file());
}
