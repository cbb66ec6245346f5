//! Content-addressed stage cache.
//!
//! Each stage writes its artifacts into `{root}/{stage}-{key prefix}/`. The
//! key hashes the stage name, the stage's own configuration and the content
//! hashes of everything it reads, so any changed input yields a new entry.
//! `meta.json` is written last and lists the hash of every artifact; an
//! entry whose files no longer match is deleted and rebuilt.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, Stage};

const META: &str = "meta.json";

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let mut file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| PipelineError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Cache key of one stage invocation.
pub fn stage_key(stage: Stage, config: &serde_json::Value, inputs: &BTreeMap<String, String>) -> String {
    let material = serde_json::json!({ "stage": stage.to_string(), "config": config, "inputs": inputs });
    sha256_bytes(material.to_string().as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Meta {
    stage: String,
    key: String,
    files: BTreeMap<String, String>,
}

/// A complete, verified cache entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub stage: Stage,
    pub key: String,
    pub dir: PathBuf,
    /// Artifact file name to sha256.
    pub files: BTreeMap<String, String>,
    /// Whether the entry was reused rather than built.
    pub hit: bool,
}

impl CacheEntry {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn hash(&self, name: &str) -> Result<&str, PipelineError> {
        self.files
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| PipelineError::Internal(format!("{} artifact `{name}` missing from cache entry", self.stage)))
    }
}

#[derive(Debug, Clone)]
pub struct StageCache {
    root: PathBuf,
}

impl StageCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_dir(&self, stage: Stage, key: &str) -> PathBuf {
        self.root.join(format!("{stage}-{}", &key[..16]))
    }

    /// Returns the entry for `key` if present and intact. A damaged entry
    /// is removed.
    pub fn lookup(&self, stage: Stage, key: &str) -> Result<Option<CacheEntry>, PipelineError> {
        let dir = self.entry_dir(stage, key);
        let Ok(text) = fs::read_to_string(dir.join(META)) else {
            return Ok(None);
        };
        let intact = match serde_json::from_str::<Meta>(&text) {
            Ok(meta) if meta.key == key => match verify(&dir, &meta.files) {
                Ok(()) => return Ok(Some(CacheEntry { stage, key: key.to_string(), dir, files: meta.files, hit: true })),
                Err(reason) => reason,
            },
            Ok(_) => "key differs from its directory".to_string(),
            Err(e) => format!("unreadable meta.json: {e}"),
        };
        tracing::warn!(stage = %stage, dir = %dir.display(), "stale cache entry ({intact}); recomputing");
        fs::remove_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        Ok(None)
    }

    /// Reuses the entry for `key` or runs `build` in a scratch directory and
    /// publishes its output.
    pub fn get_or_build(
        &self,
        stage: Stage,
        key: &str,
        build: impl FnOnce(&Path) -> Result<(), PipelineError>,
    ) -> Result<CacheEntry, PipelineError> {
        if let Some(entry) = self.lookup(stage, key)? {
            tracing::info!(stage = %stage, key = &key[..16], "cache hit");
            return Ok(entry);
        }
        let dir = self.entry_dir(stage, key);
        let scratch = self.root.join(format!(".building-{stage}-{}-{}", &key[..16], std::process::id()));
        if scratch.exists() {
            fs::remove_dir_all(&scratch).map_err(|e| PipelineError::io(&scratch, e))?;
        }
        fs::create_dir_all(&scratch).map_err(|e| PipelineError::io(&scratch, e))?;
        if let Err(e) = build(&scratch) {
            let _ = fs::remove_dir_all(&scratch);
            return Err(e);
        }
        let mut files = BTreeMap::new();
        for item in fs::read_dir(&scratch).map_err(|e| PipelineError::io(&scratch, e))? {
            let item = item.map_err(|e| PipelineError::io(&scratch, e))?;
            let name = item.file_name().to_string_lossy().into_owned();
            files.insert(name, sha256_file(&item.path())?);
        }
        let meta = Meta { stage: stage.to_string(), key: key.to_string(), files: files.clone() };
        let meta_path = scratch.join(META);
        fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
            .map_err(|e| PipelineError::io(&meta_path, e))?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        }
        fs::rename(&scratch, &dir).map_err(|e| PipelineError::io(&dir, e))?;
        Ok(CacheEntry { stage, key: key.to_string(), dir, files, hit: false })
    }
}

fn verify(dir: &Path, files: &BTreeMap<String, String>) -> Result<(), String> {
    for (name, expected) in files {
        match sha256_file(&dir.join(name)) {
            Ok(found) if &found == expected => {}
            Ok(_) => return Err(format!("{name} changed")),
            Err(_) => return Err(format!("{name} missing")),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> Result<(), PipelineError> {
        fs::write(dir.join(name), body).map_err(|e| PipelineError::io(dir, e))
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn keys_depend_on_every_part() {
        let cfg = serde_json::json!({ "k": 1 });
        let inputs = BTreeMap::from([("corpus".to_string(), "aa".to_string())]);
        let base = stage_key(Stage::Ingest, &cfg, &inputs);
        assert_eq!(base, stage_key(Stage::Ingest, &cfg, &inputs));
        assert_ne!(base, stage_key(Stage::Encode, &cfg, &inputs));
        assert_ne!(base, stage_key(Stage::Ingest, &serde_json::json!({ "k": 2 }), &inputs));
        let other = BTreeMap::from([("corpus".to_string(), "ab".to_string())]);
        assert_ne!(base, stage_key(Stage::Ingest, &cfg, &other));
    }

    #[test]
    fn build_then_hit_then_rebuild_after_tampering() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = StageCache::new(tmp.path());
        let key = sha256_bytes(b"k");
        let mut builds = 0;
        let mut build = |d: &Path| {
            builds += 1;
            write(d, "out.txt", "hello")
        };
        let first = cache.get_or_build(Stage::Ingest, &key, &mut build).unwrap();
        assert!(!first.hit);
        assert_eq!(first.hash("out.txt").unwrap(), sha256_bytes(b"hello"));
        let second = cache.get_or_build(Stage::Ingest, &key, &mut build).unwrap();
        assert!(second.hit);
        fs::write(second.path("out.txt"), "tampered").unwrap();
        let third = cache.get_or_build(Stage::Ingest, &key, &mut build).unwrap();
        assert!(!third.hit);
        assert_eq!(fs::read_to_string(third.path("out.txt")).unwrap(), "hello");
        assert_eq!(builds, 2);
    }

    #[test]
    fn failed_build_leaves_no_entry() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = StageCache::new(tmp.path());
        let key = sha256_bytes(b"k");
        let err = cache.get_or_build(Stage::Cluster, &key, |_| Err(PipelineError::Internal("boom".into())));
        assert!(err.is_err());
        assert!(cache.lookup(Stage::Cluster, &key).unwrap().is_none());
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
    }
}
