//! Token-level event extraction as semantic graph parsing.
//!
//! This crate is the allocation-only core: label vocabulary, BIO repair and
//! corpus statistics, the three event-graph encodings with their decoders,
//! chunk-level scoring, and a query-based node/anchor/edge parser with
//! hand-written backpropagation. File formats, the embedding archive and the
//! command line live in the `eventgraph` crate.
//!
//! Builds without `std` (disable default features); `alloc` is required.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod embeddings;
pub mod graph;
pub mod label;
pub mod nn;
pub mod parser;
pub mod scorer;
pub mod synthetic;
pub mod tensor;

pub use corpus::{compute_stats, repair_tags, AnnotatedSentence, CorpusStats, Language, SentenceError};
pub use embeddings::{EmbeddingMatrix, EmbeddingSource, ToyEncoderConfig, Vocab};
pub use graph::{
    decode_to_bio, encode, Anchor, DecodeDiagnostics, EventGraph, Flavor, GraphEdge, GraphNode,
    SchemaViolation, Span,
};
pub use label::{BioTag, RoleLabel, TagError};
pub use parser::{ParserConfig, PredictedGraph};
pub use scorer::{extract_chunks, score, MacroAverage, RoleChunk, RoleScore, ScoreError, ScoreReport};
pub use tensor::{Mat, Real};
