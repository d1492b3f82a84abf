//! Contextual token embeddings.
//!
//! The parser only ever sees an [`EmbeddingMatrix`] (one row per task
//! token). Two providers produce it: the small trainable [`ToyEncoder`]
//! defined here, and precomputed archives written by any external model
//! (read by the `eventgraph` crate), exposed through [`EmbeddingSource`].

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand_chacha::ChaCha8Rng;

use crate::nn::{impl_params, normal_init, stack_backward, stack_forward, BlockCache, Dropout, LayerNorm, LayerNormCache, Params, TransformerBlock};
use crate::tensor::{Mat, Real};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("sentence `{id}` has {len} tokens, longer than max_len {max_len}")]
    TooLong { id: String, len: usize, max_len: usize },
    #[error("embedding for `{0}` has no rows")]
    Empty(String),
    #[error("embedding for `{0}` contains non-finite values")]
    NonFinite(String),
    #[error("embedding for `{id}` has {rows} rows, sentence has {tokens} tokens")]
    RowMismatch { id: String, rows: usize, tokens: usize },
    #[error("embedding for `{id}` has dimension {found}, expected {expected}")]
    DimMismatch { id: String, found: usize, expected: usize },
    #[error("no embedding for sentence `{0}`")]
    Missing(String),
    #[error("invalid encoder config: {0}")]
    Config(&'static str),
}

/// `n × d` float32 embeddings of one sentence's tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub sentence_id: String,
    pub values: Mat<f32>,
}

impl EmbeddingMatrix {
    pub fn new(sentence_id: impl Into<String>, values: Mat<f32>) -> Result<Self, EmbeddingError> {
        let sentence_id = sentence_id.into();
        if values.rows() == 0 {
            return Err(EmbeddingError::Empty(sentence_id));
        }
        if !values.all_finite() {
            return Err(EmbeddingError::NonFinite(sentence_id));
        }
        Ok(EmbeddingMatrix { sentence_id, values })
    }

    pub fn n_tokens(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }
}

/// Lookup of precomputed embeddings by sentence id.
pub trait EmbeddingSource {
    fn get(&self, sentence_id: &str) -> Option<&EmbeddingMatrix>;
    fn dim(&self) -> Option<usize>;
}

impl EmbeddingSource for BTreeMap<String, EmbeddingMatrix> {
    fn get(&self, sentence_id: &str) -> Option<&EmbeddingMatrix> {
        BTreeMap::get(self, sentence_id)
    }

    fn dim(&self) -> Option<usize> {
        self.values().next().map(EmbeddingMatrix::dim)
    }
}

/// Token string to id map. Id 0 is reserved for unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vocab {
    tokens: Vec<String>,
    #[cfg_attr(feature = "serde", serde(skip))]
    index: BTreeMap<String, u32>,
}

impl Vocab {
    pub const UNK: u32 = 0;
    pub const UNK_TOKEN: &'static str = "<unk>";

    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab::from_tokens(alloc::vec![String::from(Self::UNK_TOKEN)]);
        for t in tokens {
            if !v.index.contains_key(t) {
                v.index.insert(String::from(t), v.tokens.len() as u32);
                v.tokens.push(String::from(t));
            }
        }
        v
    }

    /// Rebuilds from an id-ordered token list whose first entry is the
    /// unknown-token placeholder.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ToyEncoderConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    pub max_len: usize,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        ToyEncoderConfig {
            vocab_size: 0,
            dim: 64,
            n_layers: 2,
            n_heads: 4,
            ffn_dim: 128,
            dropout: 0.1,
            max_len: 256,
        }
    }
}

impl ToyEncoderConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim == 0 || self.n_heads == 0 || self.dim % self.n_heads != 0 {
            return Err(EmbeddingError::Config("dim must be a positive multiple of n_heads"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(EmbeddingError::Config("dropout must lie in [0, 1)"));
        }
        if self.vocab_size == 0 || self.max_len == 0 || self.ffn_dim == 0 {
            return Err(EmbeddingError::Config("vocab_size, ffn_dim and max_len must be positive"));
        }
        Ok(())
    }
}

/// Sinusoidal position code for position `pos`, column `i` of `dim`.
fn position_code(pos: usize, i: usize, dim: usize) -> f64 {
    let rate = 1.0 / Float::powf(10_000.0, (2 * (i / 2)) as f64 / dim as f64);
    let angle = pos as f64 * rate;
    if i % 2 == 0 {
        Float::sin(angle)
    } else {
        Float::cos(angle)
    }
}

/// Token embedding + sinusoidal positions + pre-norm self-attention blocks
/// + final layer norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder<T> {
    pub token_embedding: Mat<T>,
    pub blocks: Vec<TransformerBlock<T>>,
    pub final_norm: LayerNorm<T>,
}
impl_params!(ToyEncoder { token_embedding, blocks, final_norm });

pub struct EncoderCache<T> {
    ids: Vec<u32>,
    input_mask: Option<Mat<T>>,
    blocks: Vec<BlockCache<T>>,
    final_norm: LayerNormCache<T>,
}

impl<T: Real> ToyEncoder<T> {
    pub fn new(rng: &mut ChaCha8Rng, config: &ToyEncoderConfig) -> Self {
        ToyEncoder {
            token_embedding: normal_init(rng, config.vocab_size, config.dim, 1.0),
            blocks: (0..config.n_layers)
                .map(|_| TransformerBlock::new(rng, config.dim, config.n_heads, config.ffn_dim))
                .collect(),
            final_norm: LayerNorm::new(config.dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.token_embedding.cols()
    }

    pub fn forward(&self, ids: &[u32], dropout: &mut Dropout<'_>) -> (Mat<T>, EncoderCache<T>) {
        let dim = self.dim();
        let vocab = self.token_embedding.rows();
        let mut x = Mat::from_fn(ids.len(), dim, |t, i| T::of(position_code(t, i, dim)));
        for (t, &id) in ids.iter().enumerate() {
            let id = (id as usize).min(vocab - 1);
            for (a, &e) in x.row_mut(t).iter_mut().zip(self.token_embedding.row(id)) {
                *a += e;
            }
        }
        let input_mask = dropout.apply(&mut x);
        let (h, blocks) = stack_forward(&self.blocks, x, dropout);
        let (out, final_norm) = self.final_norm.forward(&h);
        (out, EncoderCache { ids: ids.to_vec(), input_mask, blocks, final_norm })
    }

    pub fn backward(&self, cache: &EncoderCache<T>, d_out: &Mat<T>, grad: &mut ToyEncoder<T>) {
        let dh = self.final_norm.backward(&cache.final_norm, d_out, &mut grad.final_norm);
        let mut dx = stack_backward(&self.blocks, &cache.blocks, dh, &mut grad.blocks);
        if let Some(mask) = &cache.input_mask {
            for (d, &m) in dx.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *d *= m;
            }
        }
        let vocab = self.token_embedding.rows();
        for (t, &id) in cache.ids.iter().enumerate() {
            let id = (id as usize).min(vocab - 1);
            for (g, &d) in grad.token_embedding.row_mut(id).iter_mut().zip(dx.row(t)) {
                *g += d;
            }
        }
    }

    /// Eval-mode encoding of one sentence.
    pub fn encode<S: AsRef<str>>(
        &self,
        sentence_id: &str,
        tokens: &[S],
        vocab: &Vocab,
        max_len: usize,
    ) -> Result<EmbeddingMatrix, EmbeddingError> {
        if tokens.len() > max_len {
            return Err(EmbeddingError::TooLong {
                id: String::from(sentence_id),
                len: tokens.len(),
                max_len,
            });
        }
        let (e, _) = self.forward(&vocab.ids(tokens), &mut Dropout::eval());
        EmbeddingMatrix::new(sentence_id, e.cast())
    }

    pub fn param_count(&self) -> usize {
        self.n_params()
    }
}
