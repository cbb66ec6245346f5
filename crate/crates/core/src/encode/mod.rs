//! Sentence vectors: the id-aligned [`VectorSet`], the TF-IDF baseline
//! encoder, the binary embedding store and the external encoder client.

mod io;
mod remote;
mod tfidf;

use std::path::PathBuf;

use thiserror::Error;

pub use io::{load_embeddings, load_sparse, read_embeddings, save_embeddings, save_sparse, write_embeddings};
pub use remote::{fetch_embeddings, EmbeddingFetcher, EncoderTransport, FetchConfig, HttpTransport, TransportError};
pub use tfidf::{fit_tfidf, TfidfConfig, TfidfModel};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("failed to access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not an embedding file: bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("record {index} (id `{id}`) is truncated: expected {expected} values")]
    TruncatedRecord { index: usize, id: String, expected: usize },
    #[error("embedding file is truncated in the header of record {index}")]
    TruncatedHeader { index: usize },
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("record {index} id is not valid UTF-8")]
    InvalidId { index: usize },
    #[error("vector `{id}` has dimension {found}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error("ids and vectors disagree in length ({ids} ids, {vectors} vectors)")]
    LengthMismatch { ids: usize, vectors: usize },
    #[error("id `{0}` longer than 65535 bytes")]
    IdTooLong(String),
    #[error("texts are empty")]
    EmptyInput,
    #[error("vocabulary is empty after frequency thresholds")]
    EmptyVocabulary,
    #[error("encoder batches {failed:?} failed after {attempts} attempts: {last_error}")]
    RetriesExhausted { failed: Vec<usize>, attempts: usize, last_error: String },
    #[error("encoder returned {found} vectors for a batch of {expected}")]
    BatchSizeMismatch { expected: usize, found: usize },
    #[error("encoder returned vectors of dimension {found}, earlier batches had {expected}")]
    EndpointDimensionMismatch { expected: usize, found: usize },
    #[error("missing embedding for id `{0}`")]
    MissingId(String),
}

/// A sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// A borrowed row of a [`VectorSet`].
#[derive(Debug, Clone, Copy)]
pub enum RowRef<'a> {
    Dense(&'a [f64]),
    Sparse(&'a SparseVector),
}

impl RowRef<'_> {
    pub fn norm_sq(&self) -> f64 {
        match self {
            RowRef::Dense(v) => v.iter().map(|x| x * x).sum(),
            RowRef::Sparse(s) => s.values.iter().map(|x| x * x).sum(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RowRef::Dense(v) => v.iter().all(|&x| x == 0.0),
            RowRef::Sparse(s) => s.values.iter().all(|&x| x == 0.0),
        }
    }

    pub fn dot_dense(&self, other: &[f64]) -> f64 {
        match self {
            RowRef::Dense(v) => v.iter().zip(other).map(|(a, b)| a * b).sum(),
            RowRef::Sparse(s) => s.indices.iter().zip(&s.values).map(|(&i, v)| v * other[i as usize]).sum(),
        }
    }

    /// Squared Euclidean distance to a dense point, summed component-wise.
    pub fn dist_sq_dense(&self, other: &[f64]) -> f64 {
        match self {
            RowRef::Dense(v) => v.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum(),
            RowRef::Sparse(s) => {
                let mut total = 0.0;
                let mut next = 0usize;
                for (&i, &v) in s.indices.iter().zip(&s.values) {
                    let i = i as usize;
                    total += other[next..i].iter().map(|x| x * x).sum::<f64>();
                    total += (v - other[i]) * (v - other[i]);
                    next = i + 1;
                }
                total + other[next..].iter().map(|x| x * x).sum::<f64>()
            }
        }
    }

    /// Squared Euclidean distance between two rows of the same kind.
    pub fn dist_sq(&self, other: &RowRef<'_>) -> f64 {
        match (self, other) {
            (RowRef::Dense(a), RowRef::Dense(b)) => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum(),
            (RowRef::Sparse(a), RowRef::Sparse(b)) => {
                let (mut i, mut j, mut total) = (0, 0, 0.0);
                while i < a.nnz() || j < b.nnz() {
                    let ai = a.indices.get(i).copied().unwrap_or(u32::MAX);
                    let bj = b.indices.get(j).copied().unwrap_or(u32::MAX);
                    let d = if ai == bj {
                        i += 1;
                        j += 1;
                        a.values[i - 1] - b.values[j - 1]
                    } else if ai < bj {
                        i += 1;
                        a.values[i - 1]
                    } else {
                        j += 1;
                        b.values[j - 1]
                    };
                    total += d * d;
                }
                total
            }
            (a, RowRef::Dense(b)) => a.dist_sq_dense(b),
            (RowRef::Dense(a), b) => b.dist_sq_dense(a),
        }
    }

    /// Adds `scale * self` into `acc`.
    pub fn add_into(&self, acc: &mut [f64], scale: f64) {
        match self {
            RowRef::Dense(v) => acc.iter_mut().zip(v.iter()).for_each(|(a, x)| *a += scale * x),
            RowRef::Sparse(s) => {
                for (&i, &v) in s.indices.iter().zip(&s.values) {
                    acc[i as usize] += scale * v;
                }
            }
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        match self {
            RowRef::Dense(v) => v.to_vec(),
            RowRef::Sparse(_) => {
                let mut out = vec![0.0; dim];
                self.add_into(&mut out, 1.0);
                out
            }
        }
    }

    /// Bit pattern of the row, used to count distinct vectors.
    pub fn fingerprint(&self) -> Vec<u64> {
        match self {
            RowRef::Dense(v) => v.iter().map(|x| canonical_bits(*x)).collect(),
            RowRef::Sparse(s) => s
                .indices
                .iter()
                .zip(&s.values)
                .filter(|(_, v)| **v != 0.0)
                .flat_map(|(&i, v)| [i as u64, canonical_bits(*v)])
                .collect(),
        }
    }
}

fn canonical_bits(x: f64) -> u64 {
    if x == 0.0 { 0 } else { x.to_bits() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Dense(Vec<Vec<f64>>),
    Sparse(Vec<SparseVector>),
}

/// Id-aligned vectors of uniform dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    ids: Vec<String>,
    dim: usize,
    rows: Rows,
    normalized: bool,
}

impl VectorSet {
    pub fn dense(ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self, EncodeError> {
        if ids.len() != vectors.len() {
            return Err(EncodeError::LengthMismatch { ids: ids.len(), vectors: vectors.len() });
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if let Some((id, v)) = ids.iter().zip(&vectors).find(|(_, v)| v.len() != dim) {
            return Err(EncodeError::DimensionMismatch { id: id.clone(), expected: dim, found: v.len() });
        }
        Ok(Self { ids, dim, rows: Rows::Dense(vectors), normalized: false })
    }

    pub fn sparse(ids: Vec<String>, dim: usize, vectors: Vec<SparseVector>) -> Result<Self, EncodeError> {
        if ids.len() != vectors.len() {
            return Err(EncodeError::LengthMismatch { ids: ids.len(), vectors: vectors.len() });
        }
        for (id, v) in ids.iter().zip(&vectors) {
            let in_bounds = v.indices.iter().all(|&i| (i as usize) < dim);
            let increasing = v.indices.windows(2).all(|w| w[0] < w[1]);
            if !in_bounds || !increasing || v.indices.len() != v.values.len() {
                let found = v.indices.last().map_or(0, |&i| i as usize + 1);
                return Err(EncodeError::DimensionMismatch { id: id.clone(), expected: dim, found });
            }
        }
        Ok(Self { ids, dim, rows: Rows::Sparse(vectors), normalized: false })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.rows, Rows::Sparse(_))
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn rows(&self) -> &Rows {
        &self.rows
    }

    pub fn row(&self, i: usize) -> RowRef<'_> {
        match &self.rows {
            Rows::Dense(v) => RowRef::Dense(&v[i]),
            Rows::Sparse(v) => RowRef::Sparse(&v[i]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, RowRef<'_>)> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), self.row(i)))
    }

    /// Keeps rows whose index satisfies `keep`, preserving order.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> VectorSet {
        let picked: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        let ids = picked.iter().map(|&i| self.ids[i].clone()).collect();
        let rows = match &self.rows {
            Rows::Dense(v) => Rows::Dense(picked.iter().map(|&i| v[i].clone()).collect()),
            Rows::Sparse(v) => Rows::Sparse(picked.iter().map(|&i| v[i].clone()).collect()),
        };
        VectorSet { ids, dim: self.dim, rows, normalized: self.normalized }
    }

    /// Rows picked by id, in the order given.
    pub fn subset_by_ids(&self, ids: &[String]) -> Result<VectorSet, EncodeError> {
        let index: std::collections::HashMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let positions = ids
            .iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| EncodeError::MissingId(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = match &self.rows {
            Rows::Dense(v) => Rows::Dense(positions.iter().map(|&i| v[i].clone()).collect()),
            Rows::Sparse(v) => Rows::Sparse(positions.iter().map(|&i| v[i].clone()).collect()),
        };
        Ok(VectorSet { ids: ids.to_vec(), dim: self.dim, rows, normalized: self.normalized })
    }

    /// Returns the set with every row multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> VectorSet {
        let rows = match &self.rows {
            Rows::Dense(v) => Rows::Dense(v.iter().map(|r| r.iter().map(|x| x * factor).collect()).collect()),
            Rows::Sparse(v) => Rows::Sparse(
                v.iter()
                    .map(|s| SparseVector { indices: s.indices.clone(), values: s.values.iter().map(|x| x * factor).collect() })
                    .collect(),
            ),
        };
        VectorSet { ids: self.ids.clone(), dim: self.dim, rows, normalized: false }
    }

    pub(crate) fn mark_normalized(&mut self) {
        self.normalized = true;
    }
}

/// Scales every nonzero row to unit L2 norm. Returns the number of zero rows,
/// which are left unchanged.
pub fn l2_normalize(vectors: &mut VectorSet) -> usize {
    let mut zeros = 0;
    let mut scale_row = |values: &mut [f64]| {
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            zeros += 1;
        } else {
            values.iter_mut().for_each(|x| *x /= norm);
        }
    };
    match &mut vectors.rows {
        Rows::Dense(rows) => rows.iter_mut().for_each(|r| scale_row(r)),
        Rows::Sparse(rows) => rows.iter_mut().for_each(|r| scale_row(&mut r.values)),
    }
    vectors.mark_normalized();
    zeros
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn normalize_examples() {
        let mut set = VectorSet::dense(ids(3), vec![vec![3.0, 4.0], vec![0.0, 0.0], vec![0.6, 0.8]]).unwrap();
        let zeros = l2_normalize(&mut set);
        assert_eq!(zeros, 1);
        let Rows::Dense(rows) = set.rows() else { unreachable!() };
        assert!((rows[0][0] - 0.6).abs() < 1e-15 && (rows[0][1] - 0.8).abs() < 1e-15);
        assert_eq!(rows[1], vec![0.0, 0.0]);
        assert!((rows[2][0] - 0.6).abs() < 1e-9 && (rows[2][1] - 0.8).abs() < 1e-9);
        assert!(set.normalized());
    }

    #[test]
    fn constructor_checks() {
        assert!(matches!(VectorSet::dense(ids(2), vec![vec![1.0]]), Err(EncodeError::LengthMismatch { .. })));
        assert!(matches!(
            VectorSet::dense(ids(2), vec![vec![1.0], vec![1.0, 2.0]]),
            Err(EncodeError::DimensionMismatch { .. })
        ));
        let bad = SparseVector { indices: vec![3], values: vec![1.0] };
        assert!(VectorSet::sparse(ids(1), 3, vec![bad]).is_err());
    }

    #[test]
    fn sparse_dense_distance_agree() {
        let s = SparseVector { indices: vec![1, 3], values: vec![2.0, -1.0] };
        let dense = RowRef::Sparse(&s).to_dense(5);
        let other = vec![0.5, 1.0, 0.0, 2.0, -1.0];
        let a = RowRef::Sparse(&s).dist_sq_dense(&other);
        let b = RowRef::Dense(&dense).dist_sq_dense(&other);
        assert!((a - b).abs() < 1e-12);
        let t = SparseVector { indices: vec![0, 3], values: vec![1.0, 1.0] };
        let c = RowRef::Sparse(&s).dist_sq(&RowRef::Sparse(&t));
        assert!((c - (1.0 + 4.0 + 4.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normalized_rows_have_unit_norm(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 1..20)) {
            let mut set = VectorSet::dense(ids(rows.len()), rows).unwrap();
            l2_normalize(&mut set);
            for (_, row) in set.iter() {
                let n = row.norm();
                prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-6);
            }
        }
    }
}
