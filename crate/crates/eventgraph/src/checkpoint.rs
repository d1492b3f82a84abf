//! Model checkpoints.
//!
//! ```text
//! b"EGCKPT01"      magic
//! u32 LE           header length in bytes
//! header           UTF-8 JSON, see `Header`
//! tensor data      f32 LE, row-major, tensors in header order
//! ```
//!
//! The header carries the full parser configuration, training progress,
//! the toy-encoder vocabulary (if any), and the name and shape of every
//! tensor. Loading rebuilds the architecture from the configuration and
//! refuses files whose tensor list does not match it.

use std::fs;
use std::path::Path;

use eventgraph_core::nn::Params;
use eventgraph_core::parser::Model;
use eventgraph_core::{ParserConfig, Vocab};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 8] = b"EGCKPT01";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint tensors do not match the configured architecture: {0}")]
    Architecture(String),
    #[error("checkpoint has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: ParserConfig,
    /// Epochs completed when the checkpoint was written.
    epoch: usize,
    vocab: Option<Vec<String>>,
    tensors: Vec<TensorInfo>,
}

/// A model plus the number of training epochs behind it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub epoch: usize,
    pub model: Model<f32>,
}

pub fn encode_checkpoint(model: &Model<f32>, epoch: usize) -> Vec<u8> {
    let named = model.named();
    let header = Header {
        config: model.config.clone(),
        epoch,
        vocab: model.vocab.as_ref().map(|v| v.tokens().to_vec()),
        tensors: named
            .iter()
            .map(|(name, m)| TensorInfo { name: name.clone(), rows: m.rows(), cols: m.cols() })
            .collect(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + header.len() + 4 * model.n_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, m) in named {
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let rest = &bytes[MAGIC.len()..];
    let len_bytes: [u8; 4] = rest.get(..4).ok_or(CheckpointError::Truncated)?.try_into().expect("4 bytes");
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let header_bytes = rest.get(4..4 + header_len).ok_or(CheckpointError::Truncated)?;
    let header: Header = serde_json::from_slice(header_bytes).map_err(|e| CheckpointError::Header(e.to_string()))?;
    let problems = header.config.problems();
    if !problems.is_empty() {
        return Err(CheckpointError::Header(problems.join("; ")));
    }

    let mut model: Model<f32> = Model::new(&header.config, header.vocab.map(Vocab::from_tokens));
    let expected: Vec<(String, usize, usize)> =
        model.named().into_iter().map(|(n, m)| (n, m.rows(), m.cols())).collect();
    if expected.len() != header.tensors.len() {
        return Err(CheckpointError::Architecture(format!(
            "{} tensors stored, {} expected",
            header.tensors.len(),
            expected.len()
        )));
    }
    for ((name, rows, cols), t) in expected.iter().zip(&header.tensors) {
        if (name, *rows, *cols) != (&t.name, t.rows, t.cols) {
            return Err(CheckpointError::Architecture(format!(
                "stored `{}` {}×{}, expected `{name}` {rows}×{cols}",
                t.name, t.rows, t.cols
            )));
        }
    }

    let mut data = &rest[4 + header_len..];
    for m in model.tensors_mut() {
        let need = 4 * m.len();
        if data.len() < need {
            return Err(CheckpointError::Truncated);
        }
        for (v, chunk) in m.as_mut_slice().iter_mut().zip(data[..need].chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        }
        data = &data[need..];
    }
    if !data.is_empty() {
        return Err(CheckpointError::TrailingBytes(data.len()));
    }
    Ok(Checkpoint { epoch: header.epoch, model })
}

pub fn save_checkpoint(path: &Path, model: &Model<f32>, epoch: usize) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(model, epoch))
        .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    decode_checkpoint(&bytes)
}
