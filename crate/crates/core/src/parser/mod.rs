//! Query-based graph parser.
//!
//! Contextual token embeddings are projected to latent queries (one or more
//! per token, plus a learned root query for the labeled-edge flavor) and
//! refined by a transformer stack. Each query is classified as a node or
//! as no node; present nodes are anchored to tokens by a biaffine scorer
//! between queries and token embeddings, and connected by a biaffine edge
//! presence scorer and a per-label biaffine edge labeler.

use alloc::collections::BTreeMap;

use crate::embeddings::ToyEncoderConfig;
use crate::graph::{EventGraph, Flavor, NodeId};

mod model;
mod optim;
mod predict;
mod targets;
mod train;

pub use model::{Input, LossBreakdown, Model, ParserHead, SentenceScores};
pub use optim::Adam;
pub use predict::predict;
pub use targets::{assign_targets, Targets};
pub use train::{train, EpochReport, TrainError, TrainSet};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum EncoderConfig {
    /// Trainable in-crate encoder over a vocabulary built from training data.
    Toy(ToyEncoderConfig),
    /// Fixed embeddings of the given width, looked up by sentence id.
    Precomputed { dim: usize },
}

impl EncoderConfig {
    pub fn dim(&self) -> usize {
        match self {
            EncoderConfig::Toy(c) => c.dim,
            EncoderConfig::Precomputed { dim } => *dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LossWeights {
    pub node: f64,
    pub anchor: f64,
    pub edge_presence: f64,
    pub edge_label: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { node: 1.0, anchor: 1.0, edge_presence: 1.0, edge_label: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LrDecay {
    #[default]
    Constant,
    /// Linear decay to zero at the last step.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub warmup_steps: usize,
    pub decay: LrDecay,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            warmup_steps: 0,
            decay: LrDecay::Constant,
            grad_clip: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ParserConfig {
    pub flavor: Flavor,
    pub encoder: EncoderConfig,
    pub query_dim: usize,
    pub queries_per_token: usize,
    pub n_query_layers: usize,
    pub n_heads: usize,
    pub query_ffn_dim: usize,
    pub anchor_threshold: f64,
    pub edge_threshold: f64,
    pub loss_weights: LossWeights,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            flavor: Flavor::NodeCentric,
            encoder: EncoderConfig::Toy(ToyEncoderConfig::default()),
            query_dim: 64,
            queries_per_token: 1,
            n_query_layers: 1,
            n_heads: 4,
            query_ffn_dim: 128,
            anchor_threshold: 0.5,
            edge_threshold: 0.5,
            loss_weights: LossWeights::default(),
            optimizer: OptimizerConfig::default(),
            batch_size: 32,
            epochs: 20,
            dropout: 0.1,
            seed: 42,
        }
    }
}

impl ParserConfig {
    /// Default parser over precomputed embeddings, with the smaller learning
    /// rate suited to pretrained features.
    pub fn precomputed(flavor: Flavor, dim: usize) -> Self {
        ParserConfig {
            flavor,
            encoder: EncoderConfig::Precomputed { dim },
            optimizer: OptimizerConfig { learning_rate: 6e-5, ..OptimizerConfig::default() },
            ..ParserConfig::default()
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder.dim()
    }

    /// Node classes: index 0 is "no node". Node-centric flavors add one class
    /// per role, labeled-edge a single "node" class.
    pub fn node_classes(&self) -> usize {
        match self.flavor {
            Flavor::LabeledEdge => 2,
            Flavor::NodeCentric | Flavor::NodeCentricSplit => 1 + crate::label::RoleLabel::ALL.len(),
        }
    }

    pub fn edge_labels(&self) -> usize {
        match self.flavor {
            Flavor::LabeledEdge => crate::label::RoleLabel::ALL.len(),
            Flavor::NodeCentric | Flavor::NodeCentricSplit => 0,
        }
    }

    /// Every violated constraint, so callers can report them together.
    pub fn problems(&self) -> alloc::vec::Vec<&'static str> {
        let mut out = alloc::vec::Vec::new();
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.anchor_threshold) {
            out.push("anchor_threshold must lie in (0, 1)");
        }
        if !open_unit(self.edge_threshold) {
            out.push("edge_threshold must lie in (0, 1)");
        }
        if self.query_dim == 0 || self.n_heads == 0 || self.query_dim % self.n_heads != 0 {
            out.push("query_dim must be a positive multiple of n_heads");
        }
        if self.queries_per_token == 0 {
            out.push("queries_per_token must be positive");
        }
        if self.query_ffn_dim == 0 {
            out.push("query_ffn_dim must be positive");
        }
        if self.batch_size == 0 {
            out.push("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            out.push("dropout must lie in [0, 1)");
        }
        if !(self.optimizer.learning_rate > 0.0) {
            out.push("optimizer.learning_rate must be positive");
        }
        match &self.encoder {
            EncoderConfig::Toy(c) => {
                if c.dim == 0 || c.n_heads == 0 || c.dim % c.n_heads != 0 {
                    out.push("encoder.dim must be a positive multiple of encoder.n_heads");
                }
                if !(0.0..1.0).contains(&c.dropout) {
                    out.push("encoder.dropout must lie in [0, 1)");
                }
                if c.max_len == 0 || c.ffn_dim == 0 {
                    out.push("encoder.max_len and encoder.ffn_dim must be positive");
                }
            }
            EncoderConfig::Precomputed { dim } => {
                if *dim == 0 {
                    out.push("encoder.dim must be positive");
                }
            }
        }
        let w = self.loss_weights;
        if [w.node, w.anchor, w.edge_presence, w.edge_label].iter().any(|x| !(*x >= 0.0)) {
            out.push("loss_weights must be non-negative");
        }
        out
    }
}

/// A decoded graph with the probabilities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedGraph {
    pub graph: EventGraph,
    /// Highest class probability of each non-root node's query.
    pub node_scores: BTreeMap<NodeId, f64>,
    /// Edge presence probability of each emitted edge.
    pub edge_scores: BTreeMap<(NodeId, NodeId), f64>,
}
