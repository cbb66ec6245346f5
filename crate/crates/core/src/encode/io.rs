//! Binary vector stores.
//!
//! Dense embeddings (`EMB1`), all integers little-endian:
//!
//! ```text
//! magic "EMB1" | u32 count | u32 dim
//! count x ( u16 id_len | id_len bytes UTF-8 id | dim x f32 )
//! ```
//!
//! Sparse vectors (`SPV1`, used for cached TF-IDF matrices):
//!
//! ```text
//! magic "SPV1" | u32 count | u32 dim
//! count x ( u16 id_len | id bytes | u32 nnz | nnz x (u32 index | f64 value) )
//! ```
//!
//! Dense values are narrowed to f32 on write, so saving a set whose values
//! are not f32-representable is lossy; loading and re-saving is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EncodeError, Rows, SparseVector, VectorSet};

const DENSE_MAGIC: [u8; 4] = *b"EMB1";
const SPARSE_MAGIC: [u8; 4] = *b"SPV1";

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> EncodeError + '_ {
    move |source| EncodeError::Io { path: path.to_path_buf(), source }
}

pub fn save_embeddings(path: &Path, set: &VectorSet) -> Result<(), EncodeError> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write_embeddings(&mut out, set).map_err(|e| match e {
        EncodeError::Io { source, .. } => io_err(path)(source),
        other => other,
    })?;
    out.flush().map_err(io_err(path))
}

/// Writes `set` in the `EMB1` layout. Sparse sets are densified.
pub fn write_embeddings(out: &mut impl Write, set: &VectorSet) -> Result<(), EncodeError> {
    let w = |r: std::io::Result<()>| r.map_err(|source| EncodeError::Io { path: "<writer>".into(), source });
    w(out.write_all(&DENSE_MAGIC))?;
    w(out.write_all(&(set.len() as u32).to_le_bytes()))?;
    w(out.write_all(&(set.dim() as u32).to_le_bytes()))?;
    for (id, row) in set.iter() {
        write_id(out, id)?;
        let values = row.to_dense(set.dim());
        let mut buf = Vec::with_capacity(values.len() * 4);
        for v in values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w(out.write_all(&buf))?;
    }
    Ok(())
}

fn write_id(out: &mut impl Write, id: &str) -> Result<(), EncodeError> {
    let len: u16 = id.len().try_into().map_err(|_| EncodeError::IdTooLong(id.to_string()))?;
    out.write_all(&len.to_le_bytes())
        .and_then(|_| out.write_all(id.as_bytes()))
        .map_err(|source| EncodeError::Io { path: "<writer>".into(), source })
}

pub fn load_embeddings(path: &Path) -> Result<VectorSet, EncodeError> {
    let mut reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    read_embeddings(&mut reader)
}

struct Cursor<'a, R> {
    inner: &'a mut R,
}

impl<R: Read> Cursor<'_, R> {
    /// Reads exactly `buf.len()` bytes; `Ok(false)` on a short read.
    fn fill(&mut self, buf: &mut [u8]) -> Result<bool, EncodeError> {
        let mut read = 0;
        while read < buf.len() {
            match self.inner.read(&mut buf[read..]) {
                Ok(0) => return Ok(false),
                Ok(n) => read += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(source) => return Err(EncodeError::Io { path: "<reader>".into(), source }),
            }
        }
        Ok(true)
    }

    fn trailing(&mut self) -> Result<usize, EncodeError> {
        let mut rest = Vec::new();
        self.inner
            .read_to_end(&mut rest)
            .map_err(|source| EncodeError::Io { path: "<reader>".into(), source })?;
        Ok(rest.len())
    }

    fn header(&mut self, magic: [u8; 4]) -> Result<(usize, usize), EncodeError> {
        let mut head = [0u8; 12];
        if !self.fill(&mut head)? {
            return Err(EncodeError::TruncatedHeader { index: 0 });
        }
        let found: [u8; 4] = head[..4].try_into().unwrap();
        if found != magic {
            return Err(EncodeError::BadMagic(found));
        }
        let count = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        Ok((count, dim))
    }

    fn id(&mut self, index: usize) -> Result<String, EncodeError> {
        let mut len = [0u8; 2];
        if !self.fill(&mut len)? {
            return Err(EncodeError::TruncatedHeader { index });
        }
        let mut bytes = vec![0u8; u16::from_le_bytes(len) as usize];
        if !self.fill(&mut bytes)? {
            return Err(EncodeError::TruncatedHeader { index });
        }
        String::from_utf8(bytes).map_err(|_| EncodeError::InvalidId { index })
    }
}

pub fn read_embeddings(reader: &mut impl Read) -> Result<VectorSet, EncodeError> {
    let mut cur = Cursor { inner: reader };
    let (count, dim) = cur.header(DENSE_MAGIC)?;
    let mut ids = Vec::with_capacity(count);
    let mut rows = Vec::with_capacity(count);
    let mut buf = vec![0u8; dim * 4];
    for index in 0..count {
        let id = cur.id(index)?;
        if !cur.fill(&mut buf)? {
            return Err(EncodeError::TruncatedRecord { index, id, expected: dim });
        }
        rows.push(buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect());
        ids.push(id);
    }
    let extra = cur.trailing()?;
    if extra > 0 {
        return Err(EncodeError::TrailingBytes(extra));
    }
    let mut set = VectorSet::dense(ids, rows)?;
    set.dim = dim;
    Ok(set)
}

pub fn save_sparse(path: &Path, set: &VectorSet) -> Result<(), EncodeError> {
    let Rows::Sparse(rows) = set.rows() else {
        return save_embeddings(path, set);
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut buf = Vec::new();
    buf.extend_from_slice(&SPARSE_MAGIC);
    buf.extend_from_slice(&(set.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for (id, row) in set.ids().iter().zip(rows) {
        write_id(&mut buf, id)?;
        buf.extend_from_slice(&(row.nnz() as u32).to_le_bytes());
        for (&i, &v) in row.indices.iter().zip(&row.values) {
            buf.extend_from_slice(&i.to_le_bytes());
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

/// Loads either layout, dispatching on the magic bytes.
pub fn load_sparse(path: &Path) -> Result<VectorSet, EncodeError> {
    let mut reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(io_err(path))?;
    let mut chained = std::io::Read::chain(&magic[..], reader);
    if magic == DENSE_MAGIC {
        return read_embeddings(&mut chained);
    }
    let mut cur = Cursor { inner: &mut chained };
    let (count, dim) = cur.header(SPARSE_MAGIC)?;
    let mut ids = Vec::with_capacity(count);
    let mut rows = Vec::with_capacity(count);
    for index in 0..count {
        let id = cur.id(index)?;
        let mut nnz = [0u8; 4];
        if !cur.fill(&mut nnz)? {
            return Err(EncodeError::TruncatedHeader { index });
        }
        let nnz = u32::from_le_bytes(nnz) as usize;
        let mut buf = vec![0u8; nnz * 12];
        if !cur.fill(&mut buf)? {
            return Err(EncodeError::TruncatedRecord { index, id, expected: nnz });
        }
        let mut row = SparseVector { indices: Vec::with_capacity(nnz), values: Vec::with_capacity(nnz) };
        for chunk in buf.chunks_exact(12) {
            row.indices.push(u32::from_le_bytes(chunk[..4].try_into().unwrap()));
            row.values.push(f64::from_le_bytes(chunk[4..].try_into().unwrap()));
        }
        ids.push(id);
        rows.push(row);
    }
    let extra = cur.trailing()?;
    if extra > 0 {
        return Err(EncodeError::TrailingBytes(extra));
    }
    let mut set = VectorSet::sparse(ids, dim, rows)?;
    set.mark_normalized();
    Ok(set)
}
