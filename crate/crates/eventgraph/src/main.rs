use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eventgraph::commands::{self, CliError, PredictArgs};
use eventgraph::config::{Overrides, RunConfig};
use eventgraph::CorpusFormat;
use eventgraph_core::{Flavor, MacroAverage};

#[derive(Parser)]
#[command(name = "eventgraph", version, about = "Protest-event extraction as event-graph parsing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FlavorArg {
    LabeledEdge,
    NodeCentric,
    NodeCentricSplit,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::LabeledEdge => Flavor::LabeledEdge,
            FlavorArg::NodeCentric => Flavor::NodeCentric,
            FlavorArg::NodeCentricSplit => Flavor::NodeCentricSplit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode a BIO corpus as event graphs (JSON lines).
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "conll")]
        format: CorpusFormat,
        #[arg(long, value_enum)]
        flavor: FlavorArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check that every sentence survives encode → JSON → decode unchanged.
    RoundtripCheck {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "conll")]
        format: CorpusFormat,
        /// Flavor to check; all three when omitted.
        #[arg(long, value_enum)]
        flavor: Option<FlavorArg>,
    },
    /// Print article, sentence, and per-role chunk counts.
    Stats {
        /// One or more corpus files, counted together.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "conll")]
        format: CorpusFormat,
        /// Also write the counts as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train a parser from a TOML run configuration.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<CorpusFormat>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        flavor: Option<FlavorArg>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tag a corpus with a trained parser.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "conll")]
        format: CorpusFormat,
        #[arg(long)]
        output: PathBuf,
        /// Also write the predicted graphs as JSON lines.
        #[arg(long)]
        graphs: Option<PathBuf>,
        /// Embedding archive, for parsers over precomputed embeddings.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Score predicted BIO tags against gold tags.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum, default_value = "conll")]
        format: CorpusFormat,
        /// Format of the prediction file, if different.
        #[arg(long, value_enum)]
        pred_format: Option<CorpusFormat>,
        /// Average F1 over all seven roles instead of the observed ones.
        #[arg(long)]
        all_roles: bool,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Convert { input, format, flavor, output } => {
            commands::convert(&input, format, flavor.into(), &output)?;
        }
        Command::RoundtripCheck { input, format, flavor } => {
            let flavors = match flavor {
                Some(f) => vec![f.into()],
                None => vec![Flavor::LabeledEdge, Flavor::NodeCentric, Flavor::NodeCentricSplit],
            };
            let n = commands::roundtrip_check(&input, format, &flavors)?;
            println!("ok: {n} sentences");
        }
        Command::Stats { input, format, json } => {
            print!("{}", commands::stats(&input, format, json.as_deref())?);
        }
        Command::Train {
            config,
            train,
            dev,
            format,
            embeddings,
            output_dir,
            flavor,
            epochs,
            batch_size,
            learning_rate,
            seed,
        } => {
            let mut run_config = match config {
                Some(path) => RunConfig::load(&path).map_err(|e| CliError::Validation(e.to_string()))?,
                None => RunConfig::default(),
            };
            run_config.apply(&Overrides {
                train,
                dev,
                format,
                embeddings,
                output_dir,
                flavor: flavor.map(Into::into),
                epochs,
                batch_size,
                learning_rate,
                seed,
            });
            let summary = commands::train_run(&run_config)?;
            if let Some(dev) = &summary.dev {
                print!("{}", eventgraph_core::scorer::report_table(dev));
            }
        }
        Command::Predict { checkpoint, input, format, output, graphs, embeddings } => {
            commands::predict(&PredictArgs { checkpoint, input, format, output, graphs, embeddings })?;
        }
        Command::Score { gold, pred, format, pred_format, all_roles, json } => {
            let average = if all_roles { MacroAverage::AllRoles } else { MacroAverage::ObservedRoles };
            let (_, table) = commands::score_files(&gold, &pred, format, pred_format, average, json.as_deref())?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors are validation errors; help and version exit cleanly.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
