use alloc::string::String;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Input, LossBreakdown, Model};
use super::predict::predict;
use super::targets::Targets;
use super::{EncoderConfig, ParserConfig, PredictedGraph};
use crate::corpus::AnnotatedSentence;
use crate::embeddings::{EmbeddingError, EmbeddingSource, Vocab};
use crate::graph::{decode_to_bio, encode};
use crate::label::BioTag;
use crate::nn::{Dropout, Params};
use crate::scorer::{score_tags, MacroAverage, ScoreReport};
use crate::tensor::{Mat, Real};

use super::optim::Adam;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid parser config: {}", .0.join("; "))]
    Config(Vec<&'static str>),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("loss became non-finite in epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
}

/// Sentences plus, for precomputed encoders, where to find their embeddings.
#[derive(Clone, Copy)]
pub struct TrainSet<'a> {
    pub sentences: &'a [AnnotatedSentence],
    pub embeddings: Option<&'a dyn EmbeddingSource>,
}

impl<'a> TrainSet<'a> {
    pub fn tokens(sentences: &'a [AnnotatedSentence]) -> Self {
        TrainSet { sentences, embeddings: None }
    }

    pub fn embedded(sentences: &'a [AnnotatedSentence], embeddings: &'a dyn EmbeddingSource) -> Self {
        TrainSet { sentences, embeddings: Some(embeddings) }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub steps: usize,
    /// Mean over the epoch's sentences.
    pub loss: LossBreakdown,
    /// Mean loss of the epoch's first batch.
    pub first_batch_loss: f64,
    pub dev: Option<ScoreReport>,
}

enum OwnedInput<'a> {
    Ids(Vec<u32>),
    Embedded(&'a Mat<f32>),
}

impl OwnedInput<'_> {
    fn as_input(&self) -> Input<'_> {
        match self {
            OwnedInput::Ids(ids) => Input::Tokens(ids),
            OwnedInput::Embedded(m) => Input::Embedded(m),
        }
    }
}

fn resolve<'a, T: Real>(
    model: &Model<T>,
    sentence: &AnnotatedSentence,
    embeddings: Option<&'a dyn EmbeddingSource>,
) -> Result<OwnedInput<'a>, EmbeddingError> {
    match &model.config.encoder {
        EncoderConfig::Toy(c) => {
            if sentence.len() > c.max_len {
                return Err(EmbeddingError::TooLong {
                    id: sentence.id.clone(),
                    len: sentence.len(),
                    max_len: c.max_len,
                });
            }
            let vocab = model.vocab.as_ref().expect("toy encoder carries a vocabulary");
            Ok(OwnedInput::Ids(vocab.ids(&sentence.tokens)))
        }
        EncoderConfig::Precomputed { dim } => {
            let m = embeddings
                .and_then(|src| src.get(&sentence.id))
                .ok_or_else(|| EmbeddingError::Missing(sentence.id.clone()))?;
            if m.n_tokens() != sentence.len() {
                return Err(EmbeddingError::RowMismatch {
                    id: sentence.id.clone(),
                    rows: m.n_tokens(),
                    tokens: sentence.len(),
                });
            }
            if m.dim() != *dim {
                return Err(EmbeddingError::DimMismatch { id: sentence.id.clone(), found: m.dim(), expected: *dim });
            }
            Ok(OwnedInput::Embedded(&m.values))
        }
    }
}

impl<T: Real> Model<T> {
    /// Predicts the graph of one sentence, looking up embeddings if needed.
    pub fn predict_sentence(
        &self,
        sentence: &AnnotatedSentence,
        embeddings: Option<&dyn EmbeddingSource>,
    ) -> Result<PredictedGraph, EmbeddingError> {
        let input = resolve(self, sentence, embeddings)?;
        Ok(predict(self, &sentence.id, input.as_input()))
    }

    /// Predicted BIO tags for every sentence of `set`, and their score.
    pub fn evaluate(&self, set: TrainSet<'_>) -> Result<(ScoreReport, Vec<Vec<BioTag>>), EmbeddingError> {
        let mut tags = Vec::with_capacity(set.sentences.len());
        for s in set.sentences {
            let pred = self.predict_sentence(s, set.embeddings)?;
            let node_scores = pred.node_scores;
            tags.push(decode_to_bio(&pred.graph, Some(&node_scores)).0);
        }
        let report = score_tags(set.sentences, &tags, MacroAverage::ObservedRoles)
            .expect("predictions are aligned with their sentences");
        Ok((report, tags))
    }

    /// Loss on one sentence in eval mode.
    pub fn sentence_loss(
        &self,
        sentence: &AnnotatedSentence,
        embeddings: Option<&dyn EmbeddingSource>,
    ) -> Result<LossBreakdown, EmbeddingError> {
        let input = resolve(self, sentence, embeddings)?;
        let targets = Targets::from_graph(&encode(sentence, self.config.flavor), self.config.queries_per_token);
        Ok(self.loss(input.as_input(), &targets))
    }
}

/// Builds a fresh model for the configuration (vocabulary from `train_set`
/// when the toy encoder is used) and trains it for `config.epochs` epochs
/// of mini-batch Adam. `on_epoch` sees every epoch's report and may stop
/// training early.
pub fn train<T: Real>(
    train_set: TrainSet<'_>,
    dev_set: Option<TrainSet<'_>>,
    config: &ParserConfig,
    mut on_epoch: impl FnMut(&EpochReport, &Model<T>) -> ControlFlow<()>,
) -> Result<(Model<T>, Vec<EpochReport>), TrainError> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(TrainError::Config(problems));
    }
    if train_set.sentences.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let vocab = match config.encoder {
        EncoderConfig::Toy(_) => Some(Vocab::build(
            train_set.sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str)),
        )),
        EncoderConfig::Precomputed { .. } => None,
    };
    let mut model: Model<T> = Model::new(config, vocab);

    let mut examples = Vec::with_capacity(train_set.sentences.len());
    for s in train_set.sentences {
        let input = resolve(&model, s, train_set.embeddings)?;
        let targets = Targets::from_graph(&encode(s, config.flavor), config.queries_per_token);
        examples.push((input, targets));
    }
    if let Some(dev) = dev_set {
        for s in dev.sentences {
            resolve(&model, s, dev.embeddings)?;
        }
    }

    let batch_size = config.batch_size.min(examples.len());
    let batches_per_epoch = examples.len().div_ceil(batch_size);
    let mut adam = Adam::new(&model, config.optimizer.clone(), batches_per_epoch * config.epochs);
    let mut grad = crate::nn::zeros_like(&model);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut reports = Vec::new();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_loss = LossBreakdown::default();
        let mut first_batch_loss = 0.0;
        for (b, batch) in order.chunks(batch_size).enumerate() {
            for m in grad.tensors_mut() {
                m.fill(T::zero());
            }
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = LossBreakdown::default();
            for &i in batch {
                let (input, targets) = &examples[i];
                let mut dropout = Dropout::train(config.dropout, &mut dropout_rng);
                let l = model.accumulate_gradient(input.as_input(), targets, &mut dropout, &mut grad, scale);
                batch_loss.accumulate(&l, scale);
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged { epoch, batch: b });
            }
            if b == 0 {
                first_batch_loss = batch_loss.total;
            }
            epoch_loss.accumulate(&batch_loss, batch.len() as f64 / examples.len() as f64);
            adam.step(&mut model, &mut grad);
        }
        let dev = match dev_set {
            Some(set) if !set.sentences.is_empty() => Some(model.evaluate(set)?.0),
            _ => None,
        };
        let report = EpochReport { epoch, steps: adam.steps_taken(), loss: epoch_loss, first_batch_loss, dev };
        let flow = on_epoch(&report, &model);
        reports.push(report);
        if flow.is_break() {
            break;
        }
    }
    Ok((model, reports))
}
