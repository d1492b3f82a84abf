//! Subcommand implementations, callable without going through the CLI.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eventgraph_core::graph::encode;
use eventgraph_core::parser::{train, TrainSet};
use eventgraph_core::scorer::report_table;
use eventgraph_core::{
    decode_to_bio, score, AnnotatedSentence, EmbeddingSource, Flavor, MacroAverage, ScoreReport,
};
use log::{info, warn};
use serde::Serialize;

use crate::archive::{read_archive, EmbeddingArchive};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::RunConfig;
use crate::corpus_io::{load_corpus, write_corpus, CorpusFormat, LoadedCorpus};
use crate::graph_json::{parse_graph, serialize_graph, write_graphs};
use crate::stats_table;

/// `Validation` covers bad inputs and configurations (exit code 1);
/// `Runtime` covers everything that went wrong while doing the work
/// (exit code 2).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn invalid(e: impl ToString) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn read_input(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus, CliError> {
    let corpus = load_corpus(path, format).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if corpus.repairs > 0 {
        warn!("{}: repaired {} stray I- tags", path.display(), corpus.repairs);
    }
    Ok(corpus)
}

/// Encodes a corpus into graphs, one JSON object per line. Returns the
/// number of graphs written.
pub fn convert(input: &Path, format: CorpusFormat, flavor: Flavor, output: &Path) -> Result<usize, CliError> {
    let corpus = read_input(input, format)?;
    let graphs: Vec<_> = corpus.sentences.iter().map(|s| encode(s, flavor)).collect();
    write_file(output, &write_graphs(&graphs))?;
    info!("wrote {} {flavor} graphs to {}", graphs.len(), output.display());
    Ok(graphs.len())
}

/// Encodes, serializes, parses, and decodes every sentence under every
/// requested flavor, failing on the first sentence whose tags change.
pub fn roundtrip_check(input: &Path, format: CorpusFormat, flavors: &[Flavor]) -> Result<usize, CliError> {
    let corpus = read_input(input, format)?;
    for s in &corpus.sentences {
        for &flavor in flavors {
            let graph = encode(s, flavor);
            graph
                .validate_gold()
                .map_err(|e| invalid(format!("sentence `{}` ({flavor}): invalid graph: {e}", s.id)))?;
            let parsed = parse_graph(&serialize_graph(&graph), 1)
                .map_err(|e| invalid(format!("sentence `{}` ({flavor}): {e}", s.id)))?;
            let (tags, _) = decode_to_bio(&parsed, None);
            if parsed != graph || tags != s.tags {
                return Err(invalid(format!("sentence `{}` ({flavor}): round trip changed the tags", s.id)));
            }
        }
    }
    info!("{} sentences round-trip under {} flavor(s)", corpus.sentences.len(), flavors.len());
    Ok(corpus.sentences.len())
}

/// Statistics table over the concatenation of `inputs`.
pub fn stats(inputs: &[PathBuf], format: CorpusFormat, json: Option<&Path>) -> Result<String, CliError> {
    let mut sentences = Vec::new();
    for path in inputs {
        sentences.extend(read_input(path, format)?.sentences);
    }
    let columns = stats_table::language_columns(&sentences);
    if let Some(path) = json {
        write_file(path, &serde_json::to_string_pretty(&columns).expect("stats serialize"))?;
    }
    Ok(stats_table::render(&columns))
}

#[derive(Debug, Clone, Serialize)]
struct EpochMetrics<'a> {
    epoch: usize,
    steps: usize,
    loss: &'a eventgraph_core::parser::LossBreakdown,
    first_batch_loss: f64,
    dev_macro_f1: Option<f64>,
    dev_micro_f1: Option<f64>,
    elapsed_secs: f64,
}

/// What a training run produced.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_checkpoint: PathBuf,
    pub dev: Option<ScoreReport>,
}

fn load_embeddings(path: Option<&Path>) -> Result<Option<EmbeddingArchive>, CliError> {
    path.map(|p| read_archive(p).map_err(|e| invalid(format!("{}: {e}", p.display())))).transpose()
}

/// Trains a parser as configured, writing into `data.output_dir`:
/// `epoch-NNN.ckpt` after each epoch, `model.ckpt` at the end,
/// `metrics.jsonl` (one line per epoch), the resolved `config.toml`, and,
/// when a dev set is given, `dev_report.txt` and `dev_report.json`.
pub fn train_run(config: &RunConfig) -> Result<TrainSummary, CliError> {
    config.validate().map_err(invalid)?;
    let data = &config.data;
    let train_path = data.train.as_deref().expect("validated");
    let train_corpus = read_input(train_path, data.format)?.sentences;
    let dev_corpus = data.dev.as_deref().map(|p| read_input(p, data.format)).transpose()?.map(|c| c.sentences);
    let archive = load_embeddings(data.embeddings.as_deref())?;
    let source = archive.as_ref().map(|a| a as &dyn EmbeddingSource);

    let out_dir = &data.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    write_file(&out_dir.join("config.toml"), &config.to_toml())?;
    let metrics_path = out_dir.join("metrics.jsonl");
    let mut metrics = BufWriter::new(
        File::create(&metrics_path).map_err(|e| runtime(format!("cannot create {}: {e}", metrics_path.display())))?,
    );

    info!(
        "training {} parser on {} sentences ({} dev), {} epochs",
        config.parser.flavor,
        train_corpus.len(),
        dev_corpus.as_ref().map_or(0, Vec::len),
        config.parser.epochs
    );
    let started = Instant::now();
    let mut side_error = None;
    let result = train::<f32>(
        TrainSet { sentences: &train_corpus, embeddings: source },
        dev_corpus.as_deref().map(|sentences| TrainSet { sentences, embeddings: source }),
        &config.parser,
        |report, model| {
            let line = EpochMetrics {
                epoch: report.epoch,
                steps: report.steps,
                loss: &report.loss,
                first_batch_loss: report.first_batch_loss,
                dev_macro_f1: report.dev.as_ref().map(|d| d.macro_f1),
                dev_micro_f1: report.dev.as_ref().map(|d| d.micro.f1),
                elapsed_secs: started.elapsed().as_secs_f64(),
            };
            match &report.dev {
                Some(dev) => info!(
                    "epoch {}: loss {:.4}, dev macro-F1 {:.2}",
                    report.epoch,
                    report.loss.total,
                    100.0 * dev.macro_f1
                ),
                None => info!("epoch {}: loss {:.4}", report.epoch, report.loss.total),
            }
            let written = serde_json::to_writer(&mut metrics, &line)
                .map_err(|e| e.to_string())
                .and_then(|_| writeln!(metrics).and_then(|_| metrics.flush()).map_err(|e| e.to_string()))
                .and_then(|_| {
                    save_checkpoint(&out_dir.join(format!("epoch-{:03}.ckpt", report.epoch)), model, report.epoch)
                        .map_err(|e| e.to_string())
                });
            match written {
                Ok(()) => ControlFlow::Continue(()),
                Err(e) => {
                    side_error = Some(e);
                    ControlFlow::Break(())
                }
            }
        },
    );
    if let Some(e) = side_error {
        return Err(runtime(e));
    }
    let (model, reports) = result.map_err(|e| match e {
        eventgraph_core::parser::TrainError::Embedding(_) | eventgraph_core::parser::TrainError::Config(_) => invalid(e),
        other => runtime(other),
    })?;

    let final_checkpoint = out_dir.join("model.ckpt");
    save_checkpoint(&final_checkpoint, &model, reports.len()).map_err(runtime)?;
    let dev = reports.last().and_then(|r| r.dev.clone());
    if let Some(report) = &dev {
        write_file(&out_dir.join("dev_report.txt"), &report_table(report))?;
        write_file(&out_dir.join("dev_report.json"), &serde_json::to_string_pretty(report).expect("reports serialize"))?;
    }
    info!("finished in {:.1}s; model written to {}", started.elapsed().as_secs_f64(), final_checkpoint.display());
    Ok(TrainSummary { epochs: reports.len(), final_checkpoint, dev })
}

/// Options of [`predict`].
#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    pub format: CorpusFormat,
    pub output: PathBuf,
    pub graphs: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

/// Tags every input sentence with a trained parser. The output keeps the
/// input's ids and metadata; input tags are ignored.
pub fn predict(args: &PredictArgs) -> Result<usize, CliError> {
    let checkpoint = load_checkpoint(&args.checkpoint).map_err(|e| invalid(format!("{}: {e}", args.checkpoint.display())))?;
    let model = checkpoint.model;
    let corpus = read_input(&args.input, args.format)?.sentences;
    let archive = load_embeddings(args.embeddings.as_deref())?;
    let source = archive.as_ref().map(|a| a as &dyn EmbeddingSource);

    let mut tagged = Vec::with_capacity(corpus.len());
    let mut graphs = Vec::with_capacity(corpus.len());
    let mut dropped = 0;
    for s in corpus {
        let pred = model.predict_sentence(&s, source).map_err(invalid)?;
        let (tags, diagnostics) = decode_to_bio(&pred.graph, Some(&pred.node_scores));
        dropped += diagnostics.dropped_nodes();
        graphs.push(pred.graph);
        tagged.push(AnnotatedSentence { tags, ..s });
    }
    if dropped > 0 {
        warn!("{dropped} predicted nodes could not be decoded to BIO");
    }
    write_file(&args.output, &write_corpus(&tagged, args.format))?;
    if let Some(path) = &args.graphs {
        write_file(path, &write_graphs(&graphs))?;
    }
    info!("tagged {} sentences into {}", tagged.len(), args.output.display());
    Ok(tagged.len())
}

/// Scores `pred` against `gold` (aligned by sentence id); returns the
/// report and its table rendering.
pub fn score_files(
    gold: &Path,
    pred: &Path,
    format: CorpusFormat,
    pred_format: Option<CorpusFormat>,
    average: MacroAverage,
    json: Option<&Path>,
) -> Result<(ScoreReport, String), CliError> {
    let gold = read_input(gold, format)?.sentences;
    let pred = read_input(pred, pred_format.unwrap_or(format))?.sentences;
    let report = score(&gold, &pred, average).map_err(invalid)?;
    if let Some(path) = json {
        write_file(path, &serde_json::to_string_pretty(&report).expect("reports serialize"))?;
    }
    let table = report_table(&report);
    Ok((report, table))
}
