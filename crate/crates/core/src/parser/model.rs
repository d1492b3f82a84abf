use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::targets::Targets;
use super::{EncoderConfig, ParserConfig};
use crate::embeddings::{EncoderCache, ToyEncoder, Vocab};
use crate::nn::{
    impl_params, normal_init, stack_backward, stack_forward, Biaffine, BlockCache, Dropout, LayerNorm,
    LayerNormCache, Linear, Params, TransformerBlock,
};
use crate::tensor::{sigmoid, softmax_in_place, softplus, Mat, Real};

/// Input to one forward pass.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    /// Vocabulary ids for the toy encoder.
    Tokens(&'a [u32]),
    /// Precomputed `n × d` embeddings.
    Embedded(&'a Mat<f32>),
}

impl Input<'_> {
    pub fn len(&self) -> usize {
        match self {
            Input::Tokens(ids) => ids.len(),
            Input::Embedded(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything after the sentence encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ParserHead<T> {
    pub query_projection: Linear<T>,
    /// Learned offset per query slot (`q × h`).
    pub slot_offsets: Mat<T>,
    /// Root query (`1 × h` for labeled-edge, `0 × h` otherwise).
    pub root_query: Mat<T>,
    pub query_blocks: Vec<TransformerBlock<T>>,
    pub query_norm: Option<LayerNorm<T>>,
    pub node_classifier: Linear<T>,
    pub anchor: Biaffine<T>,
    pub edge_presence: Biaffine<T>,
    pub edge_labels: Vec<Biaffine<T>>,
}
impl_params!(ParserHead {
    query_projection,
    slot_offsets,
    root_query,
    query_blocks,
    query_norm,
    node_classifier,
    anchor,
    edge_presence,
    edge_labels,
});

impl<T: Real> ParserHead<T> {
    pub fn new(rng: &mut ChaCha8Rng, config: &ParserConfig) -> Self {
        let h = config.query_dim;
        let d = config.embed_dim();
        let roots = usize::from(config.flavor.has_root());
        ParserHead {
            query_projection: Linear::new(rng, d, h),
            slot_offsets: if config.queries_per_token > 1 {
                normal_init(rng, config.queries_per_token, h, 0.1)
            } else {
                Mat::zeros(1, h)
            },
            root_query: normal_init(rng, roots, h, 1.0),
            query_blocks: (0..config.n_query_layers)
                .map(|_| TransformerBlock::new(rng, h, config.n_heads, config.query_ffn_dim))
                .collect(),
            query_norm: (config.n_query_layers > 0).then(|| LayerNorm::new(h)),
            node_classifier: Linear::new(rng, h, config.node_classes()),
            anchor: Biaffine::new(rng, h, d),
            edge_presence: Biaffine::new(rng, h, h),
            edge_labels: (0..config.edge_labels()).map(|_| Biaffine::new(rng, h, h)).collect(),
        }
    }

    pub fn queries_per_token(&self) -> usize {
        self.slot_offsets.rows()
    }

    pub fn has_root(&self) -> bool {
        self.root_query.rows() > 0
    }

    /// Latent queries before the transformer stack: `E·W + b` per token
    /// plus the slot offset, followed by the root query if present.
    pub fn initial_queries(&self, e: &Mat<T>) -> Mat<T> {
        let q = self.queries_per_token();
        let proj = self.query_projection.forward(e);
        let h = proj.cols();
        let n = e.rows();
        let mut out = Mat::zeros(n * q + self.root_query.rows(), h);
        for t in 0..n {
            for s in 0..q {
                let row = out.row_mut(t * q + s);
                for ((o, &p), &off) in row.iter_mut().zip(proj.row(t)).zip(self.slot_offsets.row(s)) {
                    *o = p + off;
                }
            }
        }
        for r in 0..self.root_query.rows() {
            out.row_mut(n * q + r).copy_from_slice(self.root_query.row(r));
        }
        out
    }

    /// Refined queries `Q'` (`n·q (+1) × h`), eval mode.
    pub fn project_queries(&self, e: &Mat<T>) -> Mat<T> {
        let q0 = self.initial_queries(e);
        let (qs, _) = stack_forward(&self.query_blocks, q0, &mut Dropout::eval());
        match &self.query_norm {
            Some(norm) => norm.forward(&qs).0,
            None => qs,
        }
    }

    /// Row-wise node class distributions for the given query rows.
    pub fn predict_nodes(&self, queries: &Mat<T>) -> Mat<T> {
        let mut logits = self.node_classifier.forward(queries);
        for i in 0..logits.rows() {
            softmax_in_place(logits.row_mut(i));
        }
        logits
    }

    /// Anchor probabilities between queries and token embeddings.
    pub fn predict_anchors(&self, queries: &Mat<T>, e: &Mat<T>) -> Mat<T> {
        self.anchor.forward(queries, e).0.map(sigmoid)
    }

    /// Edge presence probabilities over ordered pairs of node queries, and,
    /// for labeled flavors, a label distribution per pair.
    pub fn predict_edges(&self, nodes: &Mat<T>) -> (Mat<T>, Vec<Vec<Vec<T>>>) {
        let presence = self.edge_presence.forward(nodes, nodes).0.map(sigmoid);
        let k = nodes.rows();
        let mut labels = alloc::vec![alloc::vec![Vec::new(); k]; k];
        if !self.edge_labels.is_empty() {
            let scores: Vec<Mat<T>> = self.edge_labels.iter().map(|b| b.forward(nodes, nodes).0).collect();
            for (i, row) in labels.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    let mut dist: Vec<T> = scores.iter().map(|s| s[(i, j)]).collect();
                    softmax_in_place(&mut dist);
                    *cell = dist;
                }
            }
        }
        (presence, labels)
    }
}

/// Sentence encoder (when trainable) plus parser head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ParserConfig,
    pub vocab: Option<Vocab>,
    pub encoder: Option<ToyEncoder<T>>,
    pub head: ParserHead<T>,
}

impl<T: Real> Params<T> for Model<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat<T>)>) {
        self.encoder.collect(&crate::nn::join(prefix, "encoder"), out);
        self.head.collect(&crate::nn::join(prefix, "head"), out);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat<T>>) {
        self.encoder.collect_mut(out);
        self.head.collect_mut(out);
    }
}

/// Unweighted loss terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub total: f64,
    pub node: f64,
    pub anchor: f64,
    pub edge_presence: f64,
    pub edge_label: f64,
}

impl LossBreakdown {
    pub fn accumulate(&mut self, other: &LossBreakdown, weight: f64) {
        self.total += weight * other.total;
        self.node += weight * other.node;
        self.anchor += weight * other.anchor;
        self.edge_presence += weight * other.edge_presence;
        self.edge_label += weight * other.edge_label;
    }

    pub fn is_finite(&self) -> bool {
        [self.total, self.node, self.anchor, self.edge_presence, self.edge_label]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Eval-mode outputs over all token queries of one sentence.
pub struct SentenceScores<T> {
    pub embeddings: Mat<T>,
    /// `Q'`, including the root row when present.
    pub queries: Mat<T>,
    pub node_probs: Mat<T>,
    pub anchor_probs: Mat<T>,
}

struct ForwardState<T> {
    e: Mat<T>,
    encoder: Option<EncoderCache<T>>,
    blocks: Vec<BlockCache<T>>,
    norm: Option<LayerNormCache<T>>,
    queries: Mat<T>,
}

impl<T: Real> Model<T> {
    /// Fresh parameters. `vocab` is required for the toy encoder and fixes
    /// its vocabulary size.
    pub fn new(config: &ParserConfig, vocab: Option<Vocab>) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut config = config.clone();
        let encoder = match &mut config.encoder {
            EncoderConfig::Toy(c) => {
                c.vocab_size = vocab.as_ref().map_or(1, Vocab::len).max(1);
                Some(ToyEncoder::new(&mut rng, c))
            }
            EncoderConfig::Precomputed { .. } => None,
        };
        let head = ParserHead::new(&mut rng, &config);
        let vocab = encoder.as_ref().map(|_| vocab.unwrap_or_else(|| Vocab::build([])));
        Model { config, vocab, encoder, head }
    }

    pub fn encoder_dropout(&self) -> f64 {
        match &self.config.encoder {
            EncoderConfig::Toy(c) => c.dropout,
            EncoderConfig::Precomputed { .. } => 0.0,
        }
    }

    fn encode(&self, input: Input<'_>, dropout: &mut Dropout<'_>) -> (Mat<T>, Option<EncoderCache<T>>) {
        match (input, &self.encoder) {
            (Input::Tokens(ids), Some(enc)) => {
                let p = dropout.p;
                dropout.p = self.encoder_dropout();
                let (e, cache) = enc.forward(ids, dropout);
                dropout.p = p;
                (e, Some(cache))
            }
            (Input::Embedded(m), _) => (m.cast(), None),
            (Input::Tokens(_), None) => panic!("token input requires the toy encoder"),
        }
    }

    fn forward_state(&self, input: Input<'_>, dropout: &mut Dropout<'_>) -> ForwardState<T> {
        let (e, encoder) = self.encode(input, dropout);
        let q0 = self.head.initial_queries(&e);
        let (qs, blocks) = stack_forward(&self.head.query_blocks, q0, dropout);
        let (queries, norm) = match &self.head.query_norm {
            Some(n) => {
                let (y, c) = n.forward(&qs);
                (y, Some(c))
            }
            None => (qs, None),
        };
        ForwardState { e, encoder, blocks, norm, queries }
    }

    /// Eval-mode forward pass.
    pub fn scores(&self, input: Input<'_>) -> SentenceScores<T> {
        let state = self.forward_state(input, &mut Dropout::eval());
        let n_queries = state.e.rows() * self.head.queries_per_token();
        let token_rows: Vec<usize> = (0..n_queries).collect();
        let token_queries = state.queries.select_rows(&token_rows);
        SentenceScores {
            node_probs: self.head.predict_nodes(&token_queries),
            anchor_probs: self.head.predict_anchors(&token_queries, &state.e),
            embeddings: state.e,
            queries: state.queries,
        }
    }

    /// Loss of one sentence without gradients.
    pub fn loss(&self, input: Input<'_>, targets: &Targets) -> LossBreakdown {
        self.loss_impl(input, targets, &mut Dropout::eval(), None, 1.0)
    }

    /// Loss of one sentence; adds `scale ×` its gradient into `grad`.
    pub fn accumulate_gradient(
        &self,
        input: Input<'_>,
        targets: &Targets,
        dropout: &mut Dropout<'_>,
        grad: &mut Model<T>,
        scale: f64,
    ) -> LossBreakdown {
        self.loss_impl(input, targets, dropout, Some(grad), scale)
    }

    fn loss_impl(
        &self,
        input: Input<'_>,
        targets: &Targets,
        dropout: &mut Dropout<'_>,
        grad: Option<&mut Model<T>>,
        scale: f64,
    ) -> LossBreakdown {
        let w = self.config.loss_weights;
        let head = &self.head;
        let state = self.forward_state(input, dropout);
        let n = state.e.rows();
        let q = head.queries_per_token();
        let n_queries = n * q;
        assert_eq!(n, targets.n_tokens, "targets built for a different sentence length");
        let want_grad = grad.is_some();
        let mut loss = LossBreakdown::default();
        let mut d_queries = Mat::zeros(state.queries.rows(), state.queries.cols());
        let mut d_e = Mat::zeros(n, state.e.cols());

        let token_rows: Vec<usize> = (0..n_queries).collect();
        let token_queries = state.queries.select_rows(&token_rows);

        let mut head_grad = grad;
        // node classification over every token query
        let logits = head.node_classifier.forward(&token_queries);
        let mut d_logits = Mat::zeros(logits.rows(), logits.cols());
        let node_norm = 1.0 / n_queries as f64;
        for i in 0..n_queries {
            let mut row = logits.row(i).to_vec();
            let lse = softmax_in_place(&mut row);
            let gold = targets.node_class[i];
            loss.node += (lse - logits[(i, gold)]).f64() * node_norm;
            if want_grad {
                let c = T::of(w.node * node_norm * scale);
                for (j, d) in d_logits.row_mut(i).iter_mut().enumerate() {
                    let y = if j == gold { T::one() } else { T::zero() };
                    *d = c * (row[j] - y);
                }
            }
        }
        if let Some(g) = head_grad.as_deref_mut() {
            let dq = head.node_classifier.backward(&token_queries, &d_logits, &mut g.head.node_classifier);
            for i in 0..n_queries {
                for (d, &v) in d_queries.row_mut(i).iter_mut().zip(dq.row(i)) {
                    *d += v;
                }
            }
        }

        // anchors for assigned queries
        if !targets.anchors.is_empty() {
            let rows: Vec<usize> = targets.anchors.iter().map(|(qi, _)| *qi).collect();
            let x = state.queries.select_rows(&rows);
            let (s, xu) = head.anchor.forward(&x, &state.e);
            let norm = 1.0 / (rows.len() * n) as f64;
            let mut ds = Mat::zeros(s.rows(), s.cols());
            for (a, (_, gold)) in targets.anchors.iter().enumerate() {
                for (j, &y) in gold.iter().enumerate() {
                    let z = s[(a, j)];
                    let yv = if y { T::one() } else { T::zero() };
                    loss.anchor += (softplus(z) - yv * z).f64() * norm;
                    ds[(a, j)] = T::of(w.anchor * norm * scale) * (sigmoid(z) - yv);
                }
            }
            if let Some(g) = head_grad.as_deref_mut() {
                let (dx, dy) = head.anchor.backward(&x, &state.e, &xu, &ds, &mut g.head.anchor);
                scatter_rows(&mut d_queries, &rows, &dx);
                d_e.add_assign(&dy);
            }
        }

        // edges over gold nodes (teacher forcing)
        let k = targets.node_queries.len();
        if k >= 2 {
            let x = state.queries.select_rows(&targets.node_queries);
            let mut dx_total = Mat::zeros(k, x.cols());
            let (s, xu) = head.edge_presence.forward(&x, &x);
            let norm = 1.0 / (k * (k - 1)) as f64;
            let mut ds = Mat::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    if i == j {
                        continue;
                    }
                    let z = s[(i, j)];
                    let yv = if targets.adjacency[i][j] { T::one() } else { T::zero() };
                    loss.edge_presence += (softplus(z) - yv * z).f64() * norm;
                    ds[(i, j)] = T::of(w.edge_presence * norm * scale) * (sigmoid(z) - yv);
                }
            }
            if let Some(g) = head_grad.as_deref_mut() {
                let (dx, dy) = head.edge_presence.backward(&x, &x, &xu, &ds, &mut g.head.edge_presence);
                dx_total.add_assign(&dx);
                dx_total.add_assign(&dy);
            }

            if !head.edge_labels.is_empty() && !targets.edge_labels.is_empty() {
                let forwards: Vec<(Mat<T>, Mat<T>)> =
                    head.edge_labels.iter().map(|b| b.forward(&x, &x)).collect();
                let norm = 1.0 / targets.edge_labels.len() as f64;
                let mut ds: Vec<Mat<T>> = forwards.iter().map(|_| Mat::zeros(k, k)).collect();
                for &(i, j, gold) in &targets.edge_labels {
                    let mut dist: Vec<T> = forwards.iter().map(|(s, _)| s[(i, j)]).collect();
                    let z_gold = dist[gold];
                    let lse = softmax_in_place(&mut dist);
                    loss.edge_label += (lse - z_gold).f64() * norm;
                    let c = T::of(w.edge_label * norm * scale);
                    for (l, p) in dist.into_iter().enumerate() {
                        let y = if l == gold { T::one() } else { T::zero() };
                        ds[l][(i, j)] += c * (p - y);
                    }
                }
                if let Some(g) = head_grad.as_deref_mut() {
                    for (l, (_, xu)) in forwards.iter().enumerate() {
                        let (dx, dy) = head.edge_labels[l].backward(&x, &x, xu, &ds[l], &mut g.head.edge_labels[l]);
                        dx_total.add_assign(&dx);
                        dx_total.add_assign(&dy);
                    }
                }
            }
            if want_grad {
                scatter_rows(&mut d_queries, &targets.node_queries, &dx_total);
            }
        }

        loss.total = w.node * loss.node
            + w.anchor * loss.anchor
            + w.edge_presence * loss.edge_presence
            + w.edge_label * loss.edge_label;

        let Some(g) = head_grad else {
            return loss;
        };

        // back through the query stack and projection
        let d_stack = match (&head.query_norm, &state.norm, &mut g.head.query_norm) {
            (Some(norm), Some(cache), Some(gn)) => norm.backward(cache, &d_queries, gn),
            _ => d_queries,
        };
        let d_q0 = stack_backward(&head.query_blocks, &state.blocks, d_stack, &mut g.head.query_blocks);
        let mut d_proj = Mat::zeros(n, d_q0.cols());
        for t in 0..n {
            for s_ix in 0..q {
                let src = d_q0.row(t * q + s_ix);
                for (d, &v) in d_proj.row_mut(t).iter_mut().zip(src) {
                    *d += v;
                }
                for (d, &v) in g.head.slot_offsets.row_mut(s_ix).iter_mut().zip(src) {
                    *d += v;
                }
            }
        }
        for r in 0..head.root_query.rows() {
            let src = d_q0.row(n_queries + r).to_vec();
            for (d, v) in g.head.root_query.row_mut(r).iter_mut().zip(src) {
                *d += v;
            }
        }
        d_e.add_assign(&head.query_projection.backward(&state.e, &d_proj, &mut g.head.query_projection));
        if let (Some(enc), Some(cache), Some(genc)) = (&self.encoder, &state.encoder, &mut g.encoder) {
            enc.backward(cache, &d_e, genc);
        }
        loss
    }
}

fn scatter_rows<T: Real>(dst: &mut Mat<T>, rows: &[usize], src: &Mat<T>) {
    for (i, &r) in rows.iter().enumerate() {
        for (d, &v) in dst.row_mut(r).iter_mut().zip(src.row(i)) {
            *d += v;
        }
    }
}
