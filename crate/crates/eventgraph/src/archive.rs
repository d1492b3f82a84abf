//! Binary archive of precomputed sentence embeddings.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"EGEMB1"                 magic
//! u32                       record count
//! repeated:
//!   u16 id length, id bytes (UTF-8)
//!   u32 n (tokens), u32 d (dimension)
//!   n·d f32 values, row-major
//! ```
//!
//! Every record must share one `d`, ids must be unique, values finite, and
//! nothing may follow the last record.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use eventgraph_core::{EmbeddingMatrix, EmbeddingSource, Mat};

pub const MAGIC: &[u8; 6] = b"EGEMB1";

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("byte {offset}: not an embedding archive (bad magic)")]
    BadMagic { offset: usize },
    #[error("byte {offset}: archive truncated while reading {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("byte {offset}: sentence id is not valid UTF-8")]
    BadId { offset: usize },
    #[error("byte {offset}: duplicate sentence id `{id}`")]
    DuplicateId { offset: usize, id: String },
    #[error("byte {offset}: record `{id}` has n = 0 or d = 0")]
    EmptyRecord { offset: usize, id: String },
    #[error("byte {offset}: record `{id}` has dimension {found}, earlier records have {expected}")]
    DimMismatch { offset: usize, id: String, found: usize, expected: usize },
    #[error("byte {offset}: record `{id}` contains a non-finite value")]
    NonFinite { offset: usize, id: String },
    #[error("byte {offset}: {extra} unexpected bytes after the last record")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("sentence id `{0}` is longer than 65535 bytes")]
    IdTooLong(String),
}

/// Decoded archive with an id index.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingArchive {
    records: Vec<EmbeddingMatrix>,
    index: HashMap<String, usize>,
}

impl EmbeddingArchive {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingMatrix] {
        &self.records
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArchiveError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len(), "magic").ok() != Some(&MAGIC[..]) {
            return Err(ArchiveError::BadMagic { offset: 0 });
        }
        let count = r.u32("record count")? as usize;
        let mut archive = EmbeddingArchive::default();
        let mut dim = None;
        for _ in 0..count {
            let start = r.pos;
            let id_len = r.u16("id length")? as usize;
            let id_bytes = r.take(id_len, "sentence id")?;
            let id = std::str::from_utf8(id_bytes)
                .map_err(|_| ArchiveError::BadId { offset: start + 2 })?
                .to_string();
            if archive.index.contains_key(&id) {
                return Err(ArchiveError::DuplicateId { offset: start, id });
            }
            let shape_at = r.pos;
            let n = r.u32("token count")? as usize;
            let d = r.u32("dimension")? as usize;
            if n == 0 || d == 0 {
                return Err(ArchiveError::EmptyRecord { offset: shape_at, id });
            }
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(ArchiveError::DimMismatch { offset: shape_at + 4, id, found: d, expected })
                }
                Some(_) => {}
            }
            let values_at = r.pos;
            let len = n.checked_mul(d).and_then(|x| x.checked_mul(4));
            let raw = match len {
                Some(len) => r.take(len, "embedding values")?,
                None => return Err(ArchiveError::Truncated { offset: values_at, what: "embedding values" }),
            };
            let mut values = Vec::with_capacity(n * d);
            for (k, chunk) in raw.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
                if !v.is_finite() {
                    return Err(ArchiveError::NonFinite { offset: values_at + 4 * k, id });
                }
                values.push(v);
            }
            let matrix = EmbeddingMatrix::new(id.clone(), Mat::from_vec(n, d, values))
                .expect("shape and values checked above");
            archive.index.insert(id, archive.records.len());
            archive.records.push(matrix);
        }
        if r.pos != bytes.len() {
            return Err(ArchiveError::TrailingBytes { offset: r.pos, extra: bytes.len() - r.pos });
        }
        Ok(archive)
    }
}

impl EmbeddingSource for EmbeddingArchive {
    fn get(&self, sentence_id: &str) -> Option<&EmbeddingMatrix> {
        self.index.get(sentence_id).map(|&i| &self.records[i])
    }

    fn dim(&self) -> Option<usize> {
        self.records.first().map(EmbeddingMatrix::dim)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8], ArchiveError> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(ArchiveError::Truncated { offset: self.bytes.len(), what });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, ArchiveError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ArchiveError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// Encodes records in the given order. Dimension consistency and id
/// uniqueness are the caller's responsibility; the reader enforces them.
pub fn encode_archive<'a>(records: impl IntoIterator<Item = &'a EmbeddingMatrix>) -> Result<Vec<u8>, ArchiveError> {
    let records: Vec<_> = records.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for m in records {
        let id = m.sentence_id.as_bytes();
        let id_len = u16::try_from(id.len()).map_err(|_| ArchiveError::IdTooLong(m.sentence_id.clone()))?;
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&(m.n_tokens() as u32).to_le_bytes());
        out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
        for v in m.values.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_archive<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a EmbeddingMatrix>,
) -> Result<(), ArchiveError> {
    let bytes = encode_archive(records)?;
    fs::write(path, bytes).map_err(|source| ArchiveError::Io { path: path.display().to_string(), source })
}

pub fn read_archive(path: &Path) -> Result<EmbeddingArchive, ArchiveError> {
    let bytes = fs::read(path).map_err(|source| ArchiveError::Io { path: path.display().to_string(), source })?;
    EmbeddingArchive::from_bytes(&bytes)
}
