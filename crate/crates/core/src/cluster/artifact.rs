//! Fitted-model artifact.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic        4 bytes  "CLM1"
//! algorithm    u8       0 = kmeans, 1 = hdbscan
//! clusters     u32
//! dim          u32
//! seed         u64
//! param count  u16
//! params       per param: u16 key length, UTF-8 key, f64 value (keys sorted)
//! centroids    clusters × dim f64
//! assignments  u32 count, then per record: u16 id length, UTF-8 id, i32 label (-1 = noise)
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hdbscan::HdbscanModel;
use super::kmeans::{KMeansModel, KMeansParams};
use super::ClusterError;

const MAGIC: &[u8; 4] = b"CLM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kmeans,
    Hdbscan,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Hdbscan => "hdbscan",
        })
    }
}

/// Algorithm-independent view of a fitted clustering: centroids plus the
/// training assignments, with numeric fit metadata in `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
    pub centroids: Vec<Vec<f64>>,
    pub ids: Vec<String>,
    /// Aligned with `ids`; `None` is noise.
    pub labels: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub algorithm: Algorithm,
    pub clusters: usize,
    pub dim: usize,
    pub seed: u64,
    pub points: usize,
    pub noise: usize,
    pub distortion: Option<f64>,
    pub iterations_run: Option<usize>,
    pub cluster_sizes: Vec<usize>,
    pub params: BTreeMap<String, f64>,
}

impl ClusterModel {
    pub fn from_kmeans(model: &KMeansModel, params: &KMeansParams) -> Self {
        let meta = BTreeMap::from([
            ("converged".to_string(), if model.converged { 1.0 } else { 0.0 }),
            ("distortion".to_string(), model.distortion),
            ("iterations_run".to_string(), model.iterations_run as f64),
            ("k".to_string(), model.k() as f64),
            ("max_iter".to_string(), params.max_iter as f64),
            ("restarts".to_string(), params.restarts as f64),
            ("tol".to_string(), params.tol),
        ]);
        Self {
            algorithm: Algorithm::Kmeans,
            seed: model.seed,
            dim: model.centroids.first().map_or(0, Vec::len),
            params: meta,
            centroids: model.centroids.clone(),
            ids: model.ids.clone(),
            labels: model.assignments.iter().map(|&c| Some(c)).collect(),
        }
    }

    pub fn from_hdbscan(model: &HdbscanModel, dim: usize, seed: u64) -> Self {
        let p = &model.params;
        let meta = BTreeMap::from([
            ("allow_single_cluster".to_string(), if p.allow_single_cluster { 1.0 } else { 0.0 }),
            ("min_cluster_size".to_string(), p.min_cluster_size as f64),
            ("min_samples".to_string(), p.min_samples as f64),
        ]);
        Self {
            algorithm: Algorithm::Hdbscan,
            seed,
            dim,
            params: meta,
            centroids: model.centroids.clone(),
            ids: model.ids.clone(),
            labels: model.labels.clone(),
        }
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        self.labels.iter().flatten().for_each(|&c| sizes[c] += 1);
        sizes
    }

    pub fn summary(&self) -> ClusterSummary {
        ClusterSummary {
            algorithm: self.algorithm,
            clusters: self.k(),
            dim: self.dim,
            seed: self.seed,
            points: self.ids.len(),
            noise: self.noise_count(),
            distortion: self.params.get("distortion").copied(),
            iterations_run: self.params.get("iterations_run").map(|&v| v as usize),
            cluster_sizes: self.cluster_sizes(),
            params: self.params.clone(),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), ClusterError> {
        let io = |e| ClusterError::Io { path: Default::default(), source: e };
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.push(match self.algorithm {
            Algorithm::Kmeans => 0,
            Algorithm::Hdbscan => 1,
        });
        buf.extend_from_slice(&u32_of(self.k(), "cluster count")?.to_le_bytes());
        buf.extend_from_slice(&u32_of(self.dim, "dimension")?.to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&u16_of(self.params.len(), "parameter count")?.to_le_bytes());
        for (key, value) in &self.params {
            put_str(&mut buf, key)?;
            buf.extend_from_slice(&value.to_le_bytes());
        }
        for c in &self.centroids {
            if c.len() != self.dim {
                return Err(ClusterError::Corrupt(format!("centroid of dimension {} in a {}-d model", c.len(), self.dim)));
            }
            c.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        }
        buf.extend_from_slice(&u32_of(self.ids.len(), "assignment count")?.to_le_bytes());
        for (id, label) in self.ids.iter().zip(&self.labels) {
            put_str(&mut buf, id)?;
            let code = match label {
                Some(c) => i32::try_from(*c).map_err(|_| ClusterError::Corrupt("cluster index exceeds i32".into()))?,
                None => -1,
            };
            buf.extend_from_slice(&code.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ClusterError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| ClusterError::Io { path: Default::default(), source: e })?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
        if &magic != MAGIC {
            return Err(ClusterError::BadMagic(magic));
        }
        let algorithm = match cur.take(1, "algorithm")?[0] {
            0 => Algorithm::Kmeans,
            1 => Algorithm::Hdbscan,
            other => return Err(ClusterError::Corrupt(format!("unknown algorithm code {other}"))),
        };
        let k = cur.u32("cluster count")? as usize;
        let dim = cur.u32("dimension")? as usize;
        let seed = u64::from_le_bytes(cur.take(8, "seed")?.try_into().unwrap());
        let n_params = cur.u16("parameter count")? as usize;
        let mut params = BTreeMap::new();
        for _ in 0..n_params {
            let key = cur.string("parameter key")?;
            params.insert(key, cur.f64("parameter value")?);
        }
        let mut centroids = Vec::with_capacity(k);
        for _ in 0..k {
            centroids.push((0..dim).map(|_| cur.f64("centroid")).collect::<Result<Vec<_>, _>>()?);
        }
        let n = cur.u32("assignment count")? as usize;
        let mut ids = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            ids.push(cur.string("assignment id")?);
            let code = i32::from_le_bytes(cur.take(4, "assignment label")?.try_into().unwrap());
            labels.push(match code {
                -1 => None,
                c if c >= 0 && (c as usize) < k => Some(c as usize),
                c => return Err(ClusterError::Corrupt(format!("label {c} out of range for {k} clusters"))),
            });
        }
        if cur.pos != bytes.len() {
            return Err(ClusterError::Corrupt(format!("{} trailing bytes", bytes.len() - cur.pos)));
        }
        Ok(Self { algorithm, seed, dim, params, centroids, ids, labels })
    }

    pub fn save(&self, path: &Path) -> Result<(), ClusterError> {
        let io = |e| ClusterError::Io { path: path.to_path_buf(), source: e };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        self.write_to(&mut w)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, ClusterError> {
        let file = File::open(path).map_err(|e| ClusterError::Io { path: path.to_path_buf(), source: e })?;
        Self::read_from(&mut BufReader::new(file))
    }
}

fn u32_of(v: usize, what: &str) -> Result<u32, ClusterError> {
    u32::try_from(v).map_err(|_| ClusterError::Corrupt(format!("{what} {v} does not fit in u32")))
}

fn u16_of(v: usize, what: &str) -> Result<u16, ClusterError> {
    u16::try_from(v).map_err(|_| ClusterError::Corrupt(format!("{what} {v} does not fit in u16")))
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<(), ClusterError> {
    buf.extend_from_slice(&u16_of(s.len(), "string length")?.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ClusterError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(ClusterError::Corrupt(format!("truncated while reading {what}")));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16, ClusterError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, ClusterError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, ClusterError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, ClusterError> {
        let len = self.u16(what)? as usize;
        String::from_utf8(self.take(len, what)?.to_vec())
            .map_err(|_| ClusterError::Corrupt(format!("{what} is not valid UTF-8")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ClusterModel {
        ClusterModel {
            algorithm: Algorithm::Hdbscan,
            seed: 42,
            dim: 2,
            params: BTreeMap::from([("min_cluster_size".into(), 5.0), ("min_samples".into(), 3.0)]),
            centroids: vec![vec![0.6, 0.8], vec![-1.0, 0.0]],
            ids: vec!["q1#0".into(), "q1#1".into(), "q2#0".into()],
            labels: vec![Some(1), None, Some(0)],
        }
    }

    #[test]
    fn binary_roundtrip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CLM1");
        assert_eq!(buf[4], 1);
        assert_eq!(ClusterModel::read_from(&mut buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn truncation_and_magic_are_detected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let cut = &buf[..buf.len() - 1];
        assert!(matches!(ClusterModel::read_from(&mut &cut[..]), Err(ClusterError::Corrupt(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(ClusterModel::read_from(&mut bad.as_slice()), Err(ClusterError::BadMagic(_))));
    }

    #[test]
    fn summary_counts_noise() {
        let s = sample().summary();
        assert_eq!(s.noise, 1);
        assert_eq!(s.cluster_sizes, vec![1, 1]);
        assert_eq!(s.distortion, None);
    }
}
