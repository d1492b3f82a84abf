//! TOML run configuration.
//!
//! ```toml
//! [data]
//! train = "data/en-train.conll"
//! dev = "data/en-dev.conll"
//! format = "conll"
//! output_dir = "runs/en"
//!
//! [parser]
//! flavor = "node-centric"
//! epochs = 20
//! seed = 42
//!
//! [parser.encoder]
//! kind = "toy"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! Command-line overrides win over file values.

use std::fs;
use std::path::{Path, PathBuf};

use eventgraph_core::parser::EncoderConfig;
use eventgraph_core::{Flavor, ParserConfig};
use serde::{Deserialize, Serialize};

use crate::corpus_io::CorpusFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub format: CorpusFormat,
    /// Archive of precomputed embeddings covering train and dev sentences.
    pub embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { train: None, dev: None, format: CorpusFormat::Conll, embeddings: None, output_dir: "run".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub parser: ParserConfig,
}

/// Command-line values that replace their config-file counterparts.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub format: Option<CorpusFormat>,
    pub embeddings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub flavor: Option<Flavor>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let mut config =
            Self::from_toml(&text).map_err(|message| ConfigError::Parse { path: path.to_owned(), message })?;
        if let Some(base) = path.parent() {
            config.data.resolve_relative(base);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    pub fn apply(&mut self, o: &Overrides) {
        let d = &mut self.data;
        d.train = o.train.clone().or(d.train.take());
        d.dev = o.dev.clone().or(d.dev.take());
        d.embeddings = o.embeddings.clone().or(d.embeddings.take());
        if let Some(f) = o.format {
            d.format = f;
        }
        if let Some(dir) = &o.output_dir {
            d.output_dir = dir.clone();
        }
        let p = &mut self.parser;
        if let Some(f) = o.flavor {
            p.flavor = f;
        }
        if let Some(e) = o.epochs {
            p.epochs = e;
        }
        if let Some(b) = o.batch_size {
            p.batch_size = b;
        }
        if let Some(lr) = o.learning_rate {
            p.optimizer.learning_rate = lr;
        }
        if let Some(s) = o.seed {
            p.seed = s;
        }
    }

    /// Every problem with the configuration, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = self.parser.problems().into_iter().map(String::from).collect();
        if self.parser.epochs == 0 {
            out.push("epochs must be positive".into());
        }
        let mut require_file = |what: &str, path: &Option<PathBuf>, required: bool| match path {
            Some(p) if !p.is_file() => out.push(format!("{what} file {} does not exist", p.display())),
            None if required => out.push(format!("{what} file is not set")),
            _ => {}
        };
        require_file("data.train", &self.data.train, true);
        require_file("data.dev", &self.data.dev, false);
        let precomputed = matches!(self.parser.encoder, EncoderConfig::Precomputed { .. });
        require_file("data.embeddings", &self.data.embeddings, precomputed);
        if !precomputed && self.data.embeddings.is_some() {
            out.push("data.embeddings is set but parser.encoder.kind is \"toy\"".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

impl DataConfig {
    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.train.as_mut().map(fix);
        self.dev.as_mut().map(fix);
        self.embeddings.as_mut().map(fix);
        fix(&mut self.output_dir);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_nested() {
        let c = RunConfig::from_toml(
            r#"
            [data]
            train = "t.conll"
            format = "jsonl"
            [parser]
            flavor = "labeled-edge"
            epochs = 3
            [parser.encoder]
            kind = "precomputed"
            dim = 768
            [parser.optimizer]
            learning_rate = 6e-5
            "#,
        )
        .unwrap();
        assert_eq!(c.data.format, CorpusFormat::Jsonl);
        assert_eq!(c.parser.flavor, Flavor::LabeledEdge);
        assert_eq!(c.parser.epochs, 3);
        assert_eq!(c.parser.encoder, EncoderConfig::Precomputed { dim: 768 });
        assert_eq!(c.parser.optimizer.learning_rate, 6e-5);
        assert_eq!(c.parser.batch_size, ParserConfig::default().batch_size);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[parser]\nepoch = 3\n").is_err());
        assert!(RunConfig::from_toml("[data]\ntrian = \"x\"\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::from_toml("[parser]\nseed = 1\nepochs = 4\n").unwrap();
        c.apply(&Overrides { seed: Some(9), flavor: Some(Flavor::NodeCentricSplit), ..Default::default() });
        assert_eq!(c.parser.seed, 9);
        assert_eq!(c.parser.epochs, 4);
        assert_eq!(c.parser.flavor, Flavor::NodeCentricSplit);
    }

    #[test]
    fn lists_every_problem() {
        let mut c = RunConfig::default();
        c.parser.anchor_threshold = 1.5;
        c.parser.batch_size = 0;
        c.parser.epochs = 0;
        let problems = c.problems();
        assert_eq!(problems.len(), 4, "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("data.train")));
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
