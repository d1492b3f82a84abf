//! File formats, embedding archives, checkpoints, and the command-line
//! driver around [`eventgraph_core`].

pub mod archive;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod corpus_io;
pub mod graph_json;
pub mod stats_table;

pub use archive::{read_archive, write_archive, ArchiveError, EmbeddingArchive};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use config::{DataConfig, RunConfig};
pub use corpus_io::{load_corpus, CorpusError, CorpusFormat, LoadedCorpus};
pub use graph_json::{parse_graph, read_graphs, serialize_graph, GraphParseError};
