//! Layers with explicit forward caches and backward passes.
//!
//! Every layer's gradient is an instance of the layer type itself, so
//! optimizers and finite-difference checks can walk parameters and
//! gradients in lockstep through [`Params`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{dot, softmax_in_place, sum, Mat, Real};

/// Uniform access to the trainable tensors of a module.
pub trait Params<T: Real> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat<T>)>);
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat<T>>);

    fn named(&self) -> Vec<(String, &Mat<T>)> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat<T>> {
        let mut out = Vec::new();
        self.collect_mut(&mut out);
        out
    }

    fn n_params(&self) -> usize {
        self.named().iter().map(|(_, m)| m.len()).sum()
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        format!("{prefix}.{name}")
    }
}

impl<T: Real> Params<T> for Mat<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat<T>)>) {
        out.push((String::from(prefix), self));
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat<T>>) {
        out.push(self);
    }
}

impl<T: Real, P: Params<T>> Params<T> for Vec<P> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat<T>)>) {
        for (i, p) in self.iter().enumerate() {
            p.collect(&join(prefix, &format!("{i}")), out);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat<T>>) {
        for p in self.iter_mut() {
            p.collect_mut(out);
        }
    }
}

impl<T: Real, P: Params<T>> Params<T> for Option<P> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat<T>)>) {
        if let Some(p) = self {
            p.collect(prefix, out);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat<T>>) {
        if let Some(p) = self {
            p.collect_mut(out);
        }
    }
}

/// Implements [`Params`] for a struct generic over `T` by listing its
/// parameter-bearing fields.
macro_rules! impl_params {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl<T: $crate::tensor::Real> $crate::nn::Params<T> for $ty<T> {
            fn collect<'a>(
                &'a self,
                prefix: &str,
                out: &mut alloc::vec::Vec<(alloc::string::String, &'a $crate::tensor::Mat<T>)>,
            ) {
                $( self.$field.collect(&$crate::nn::join(prefix, stringify!($field)), out); )*
            }

            fn collect_mut<'a>(&'a mut self, out: &mut alloc::vec::Vec<&'a mut $crate::tensor::Mat<T>>) {
                $( self.$field.collect_mut(out); )*
            }
        }
    };
}
pub(crate) use impl_params;

/// A copy of `p` with every tensor zeroed, used as a gradient buffer.
pub fn zeros_like<T: Real, P: Params<T> + Clone>(p: &P) -> P {
    let mut z = p.clone();
    for m in z.tensors_mut() {
        m.fill(T::zero());
    }
    z
}

pub fn normal_init<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Mat<T> {
    let dist = Normal::new(0.0, std).expect("finite std");
    Mat::from_fn(rows, cols, |_, _| T::of(dist.sample(rng)))
}

/// Inverted dropout. Inactive when no generator is supplied.
pub struct Dropout<'a> {
    pub p: f64,
    pub rng: Option<&'a mut ChaCha8Rng>,
}

impl<'a> Dropout<'a> {
    pub fn eval() -> Self {
        Dropout { p: 0.0, rng: None }
    }

    pub fn train(p: f64, rng: &'a mut ChaCha8Rng) -> Self {
        Dropout { p, rng: Some(rng) }
    }

    /// Applies dropout in place and returns the mask that was used.
    pub fn apply<T: Real>(&mut self, x: &mut Mat<T>) -> Option<Mat<T>> {
        let rng = self.rng.as_deref_mut()?;
        if self.p <= 0.0 {
            return None;
        }
        let keep = T::of(1.0 / (1.0 - self.p));
        let p = self.p;
        let mask = Mat::from_fn(x.rows(), x.cols(), |_, _| {
            if rng.random::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        });
        for (a, &m) in x.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *a *= m;
        }
        Some(mask)
    }
}

fn apply_mask<T: Real>(dx: &mut Mat<T>, mask: &Option<Mat<T>>) {
    if let Some(mask) = mask {
        for (a, &m) in dx.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *a *= m;
        }
    }
}

/// `y = x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Mat<T>,
    pub bias: Mat<T>,
}
impl_params!(Linear { weight, bias });

impl<T: Real> Linear<T> {
    pub fn new(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let std = Float::sqrt(2.0 / (fan_in + fan_out) as f64);
        Linear {
            weight: normal_init(rng, fan_in, fan_out, std),
            bias: Mat::zeros(1, fan_out),
        }
    }

    pub fn forward(&self, x: &Mat<T>) -> Mat<T> {
        let mut y = x.matmul(&self.weight);
        y.add_row(self.bias.as_slice());
        y
    }

    pub fn backward(&self, x: &Mat<T>, dy: &Mat<T>, grad: &mut Linear<T>) -> Mat<T> {
        grad.weight.add_matmul_tn(x, dy);
        for (g, s) in grad.bias.as_mut_slice().iter_mut().zip(dy.col_sums()) {
            *g += s;
        }
        dy.matmul_nt(&self.weight)
    }
}

/// Row-wise layer normalization with learned gain and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gain: Mat<T>,
    pub bias: Mat<T>,
}
impl_params!(LayerNorm { gain, bias });

pub struct LayerNormCache<T> {
    normalized: Mat<T>,
    inv_std: Vec<T>,
}

const LN_EPS: f64 = 1e-5;

impl<T: Real> LayerNorm<T> {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gain: Mat::filled(1, dim, T::one()),
            bias: Mat::zeros(1, dim),
        }
    }

    pub fn forward(&self, x: &Mat<T>) -> (Mat<T>, LayerNormCache<T>) {
        let d = T::of(x.cols() as f64);
        let mut normalized = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        let mut y = Mat::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let row = normalized.row_mut(i);
            let mean = sum(row) / d;
            let var = row.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / d;
            let s = T::one() / (var + T::of(LN_EPS)).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * s;
            }
            inv_std.push(s);
            for (j, out) in y.row_mut(i).iter_mut().enumerate() {
                *out = normalized[(i, j)] * self.gain.as_slice()[j] + self.bias.as_slice()[j];
            }
        }
        (y, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache<T>, dy: &Mat<T>, grad: &mut LayerNorm<T>) -> Mat<T> {
        let cols = dy.cols();
        let d = T::of(cols as f64);
        let mut dx = Mat::zeros(dy.rows(), cols);
        let gain = self.gain.as_slice();
        for i in 0..dy.rows() {
            let xhat = cache.normalized.row(i);
            let g = dy.row(i);
            let mut dxhat = Vec::with_capacity(cols);
            for j in 0..cols {
                grad.gain.as_mut_slice()[j] += g[j] * xhat[j];
                grad.bias.as_mut_slice()[j] += g[j];
                dxhat.push(g[j] * gain[j]);
            }
            let s1 = sum(&dxhat);
            let s2 = dot(&dxhat, xhat);
            let scale = cache.inv_std[i] / d;
            for (j, out) in dx.row_mut(i).iter_mut().enumerate() {
                *out = scale * (d * dxhat[j] - s1 - xhat[j] * s2);
            }
        }
        dx
    }
}

/// Multi-head scaled dot-product self-attention over the rows of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttention<T> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub output: Linear<T>,
    heads: usize,
}
impl_params!(SelfAttention { query, key, value, output });

pub struct AttentionCache<T> {
    x: Mat<T>,
    q: Mat<T>,
    k: Mat<T>,
    v: Mat<T>,
    probs: Vec<Mat<T>>,
    context: Mat<T>,
}

impl<T: Real> SelfAttention<T> {
    pub fn new(rng: &mut ChaCha8Rng, dim: usize, heads: usize) -> Self {
        assert!(heads > 0 && dim % heads == 0, "dim must be divisible by heads");
        SelfAttention {
            query: Linear::new(rng, dim, dim),
            key: Linear::new(rng, dim, dim),
            value: Linear::new(rng, dim, dim),
            output: Linear::new(rng, dim, dim),
            heads,
        }
    }

    pub fn forward(&self, x: &Mat<T>) -> (Mat<T>, AttentionCache<T>) {
        let (m, dim) = x.shape();
        let dk = dim / self.heads;
        let scale = T::of(1.0 / Float::sqrt(dk as f64));
        let q = self.query.forward(x);
        let k = self.key.forward(x);
        let v = self.value.forward(x);
        let mut context = Mat::zeros(m, dim);
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = h * dk..(h + 1) * dk;
            let mut p = Mat::zeros(m, m);
            for i in 0..m {
                let qi = &q.row(i)[cols.clone()];
                let row = p.row_mut(i);
                for (j, s) in row.iter_mut().enumerate() {
                    *s = dot(qi, &k.row(j)[cols.clone()]) * scale;
                }
                softmax_in_place(row);
            }
            for i in 0..m {
                for j in 0..m {
                    let pij = p[(i, j)];
                    let vj = &v.row(j)[cols.clone()];
                    let ci = &mut context.row_mut(i)[cols.clone()];
                    for (c, &vv) in ci.iter_mut().zip(vj) {
                        *c += pij * vv;
                    }
                }
            }
            probs.push(p);
        }
        let y = self.output.forward(&context);
        (y, AttentionCache { x: x.clone(), q, k, v, probs, context })
    }

    pub fn backward(&self, cache: &AttentionCache<T>, dy: &Mat<T>, grad: &mut SelfAttention<T>) -> Mat<T> {
        let (m, dim) = cache.x.shape();
        let dk = dim / self.heads;
        let scale = T::of(1.0 / Float::sqrt(dk as f64));
        let dcontext = self.output.backward(&cache.context, dy, &mut grad.output);
        let mut dq = Mat::zeros(m, dim);
        let mut dk_m = Mat::zeros(m, dim);
        let mut dv = Mat::zeros(m, dim);
        for h in 0..self.heads {
            let cols = h * dk..(h + 1) * dk;
            let p = &cache.probs[h];
            for i in 0..m {
                let dci = &dcontext.row(i)[cols.clone()];
                // dP_ij = dC_i · V_j, then softmax backward
                let mut dp = Vec::with_capacity(m);
                for j in 0..m {
                    dp.push(dot(dci, &cache.v.row(j)[cols.clone()]));
                    let pij = p[(i, j)];
                    let dvj = &mut dv.row_mut(j)[cols.clone()];
                    for (d, &g) in dvj.iter_mut().zip(dci) {
                        *d += pij * g;
                    }
                }
                let inner = (0..m).fold(T::zero(), |a, j| a + p[(i, j)] * dp[j]);
                for j in 0..m {
                    let ds = p[(i, j)] * (dp[j] - inner) * scale;
                    if ds == T::zero() {
                        continue;
                    }
                    let kj = &cache.k.row(j)[cols.clone()];
                    for (d, &kv) in dq.row_mut(i)[cols.clone()].iter_mut().zip(kj) {
                        *d += ds * kv;
                    }
                    let qi = &cache.q.row(i)[cols.clone()];
                    for (d, &qv) in dk_m.row_mut(j)[cols.clone()].iter_mut().zip(qi) {
                        *d += ds * qv;
                    }
                }
            }
        }
        let mut dx = self.query.backward(&cache.x, &dq, &mut grad.query);
        dx.add_assign(&self.key.backward(&cache.x, &dk_m, &mut grad.key));
        dx.add_assign(&self.value.backward(&cache.x, &dv, &mut grad.value));
        dx
    }
}

fn gelu<T: Real>(x: T) -> (T, T) {
    // tanh approximation; returns (value, derivative)
    let c = T::of(0.797_884_560_802_865_4);
    let a = T::of(0.044_715);
    let half = T::of(0.5);
    let inner = c * (x + a * x * x * x);
    let t = inner.tanh();
    let value = half * x * (T::one() + t);
    let deriv = half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::of(3.0) * a * x * x);
    (value, deriv)
}

/// Two-layer position-wise feed-forward network with GELU.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward<T> {
    pub up: Linear<T>,
    pub down: Linear<T>,
}
impl_params!(FeedForward { up, down });

pub struct FeedForwardCache<T> {
    x: Mat<T>,
    activated: Mat<T>,
    slope: Mat<T>,
}

impl<T: Real> FeedForward<T> {
    pub fn new(rng: &mut ChaCha8Rng, dim: usize, hidden: usize) -> Self {
        FeedForward {
            up: Linear::new(rng, dim, hidden),
            down: Linear::new(rng, hidden, dim),
        }
    }

    pub fn forward(&self, x: &Mat<T>) -> (Mat<T>, FeedForwardCache<T>) {
        let pre = self.up.forward(x);
        let mut activated = pre.clone();
        let mut slope = pre;
        for (a, s) in activated.as_mut_slice().iter_mut().zip(slope.as_mut_slice()) {
            let (v, d) = gelu(*a);
            *a = v;
            *s = d;
        }
        let y = self.down.forward(&activated);
        (y, FeedForwardCache { x: x.clone(), activated, slope })
    }

    pub fn backward(&self, cache: &FeedForwardCache<T>, dy: &Mat<T>, grad: &mut FeedForward<T>) -> Mat<T> {
        let mut dact = self.down.backward(&cache.activated, dy, &mut grad.down);
        for (d, &s) in dact.as_mut_slice().iter_mut().zip(cache.slope.as_slice()) {
            *d *= s;
        }
        self.up.backward(&cache.x, &dact, &mut grad.up)
    }
}

/// Pre-norm transformer block: `x + attn(ln(x))`, then `x + ffn(ln(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerBlock<T> {
    pub attn_norm: LayerNorm<T>,
    pub attn: SelfAttention<T>,
    pub ffn_norm: LayerNorm<T>,
    pub ffn: FeedForward<T>,
}
impl_params!(TransformerBlock { attn_norm, attn, ffn_norm, ffn });

pub struct BlockCache<T> {
    attn_norm: LayerNormCache<T>,
    attn: AttentionCache<T>,
    attn_mask: Option<Mat<T>>,
    ffn_norm: LayerNormCache<T>,
    ffn: FeedForwardCache<T>,
    ffn_mask: Option<Mat<T>>,
}

impl<T: Real> TransformerBlock<T> {
    pub fn new(rng: &mut ChaCha8Rng, dim: usize, heads: usize, hidden: usize) -> Self {
        TransformerBlock {
            attn_norm: LayerNorm::new(dim),
            attn: SelfAttention::new(rng, dim, heads),
            ffn_norm: LayerNorm::new(dim),
            ffn: FeedForward::new(rng, dim, hidden),
        }
    }

    pub fn forward(&self, x: &Mat<T>, dropout: &mut Dropout<'_>) -> (Mat<T>, BlockCache<T>) {
        let (a, attn_norm) = self.attn_norm.forward(x);
        let (mut b, attn) = self.attn.forward(&a);
        let attn_mask = dropout.apply(&mut b);
        b.add_assign(x);
        let (c, ffn_norm) = self.ffn_norm.forward(&b);
        let (mut d, ffn) = self.ffn.forward(&c);
        let ffn_mask = dropout.apply(&mut d);
        d.add_assign(&b);
        (d, BlockCache { attn_norm, attn, attn_mask, ffn_norm, ffn, ffn_mask })
    }

    pub fn backward(&self, cache: &BlockCache<T>, dy: &Mat<T>, grad: &mut TransformerBlock<T>) -> Mat<T> {
        let mut dd = dy.clone();
        apply_mask(&mut dd, &cache.ffn_mask);
        let dc = self.ffn.backward(&cache.ffn, &dd, &mut grad.ffn);
        let mut dx1 = self.ffn_norm.backward(&cache.ffn_norm, &dc, &mut grad.ffn_norm);
        dx1.add_assign(dy);
        let mut db = dx1.clone();
        apply_mask(&mut db, &cache.attn_mask);
        let da = self.attn.backward(&cache.attn, &db, &mut grad.attn);
        let mut dx = self.attn_norm.backward(&cache.attn_norm, &da, &mut grad.attn_norm);
        dx.add_assign(&dx1);
        dx
    }
}

/// Runs a stack of blocks, keeping every cache.
pub fn stack_forward<T: Real>(
    blocks: &[TransformerBlock<T>],
    x: Mat<T>,
    dropout: &mut Dropout<'_>,
) -> (Mat<T>, Vec<BlockCache<T>>) {
    let mut caches = Vec::with_capacity(blocks.len());
    let mut h = x;
    for block in blocks {
        let (next, cache) = block.forward(&h, dropout);
        caches.push(cache);
        h = next;
    }
    (h, caches)
}

pub fn stack_backward<T: Real>(
    blocks: &[TransformerBlock<T>],
    caches: &[BlockCache<T>],
    dy: Mat<T>,
    grads: &mut [TransformerBlock<T>],
) -> Mat<T> {
    let mut d = dy;
    for ((block, cache), grad) in blocks.iter().zip(caches).zip(grads.iter_mut()).rev() {
        d = block.backward(cache, &d, grad);
    }
    d
}

/// Biaffine scorer `s(x, y) = xᵀ·U·y + l·x + r·y + b` over all row pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Biaffine<T> {
    pub bilinear: Mat<T>,
    pub left: Mat<T>,
    pub right: Mat<T>,
    pub bias: Mat<T>,
}
impl_params!(Biaffine { bilinear, left, right, bias });

impl<T: Real> Biaffine<T> {
    pub fn new(rng: &mut ChaCha8Rng, left_dim: usize, right_dim: usize) -> Self {
        let std = 1.0 / Float::sqrt((left_dim * right_dim) as f64);
        Biaffine {
            bilinear: normal_init(rng, left_dim, right_dim, std),
            left: normal_init(rng, 1, left_dim, 1.0 / Float::sqrt(left_dim as f64)),
            right: normal_init(rng, 1, right_dim, 1.0 / Float::sqrt(right_dim as f64)),
            bias: Mat::zeros(1, 1),
        }
    }

    pub fn zeros(left_dim: usize, right_dim: usize) -> Self {
        Biaffine {
            bilinear: Mat::zeros(left_dim, right_dim),
            left: Mat::zeros(1, left_dim),
            right: Mat::zeros(1, right_dim),
            bias: Mat::zeros(1, 1),
        }
    }

    /// Returns the `(rows(x), rows(y))` score matrix and the `x·U` product
    /// needed by [`backward`](Self::backward).
    pub fn forward(&self, x: &Mat<T>, y: &Mat<T>) -> (Mat<T>, Mat<T>) {
        let xu = x.matmul(&self.bilinear);
        let mut s = xu.matmul_nt(y);
        let lx: Vec<T> = (0..x.rows()).map(|i| dot(x.row(i), self.left.as_slice())).collect();
        let ry: Vec<T> = (0..y.rows()).map(|j| dot(y.row(j), self.right.as_slice())).collect();
        let b = self.bias.as_slice()[0];
        for i in 0..x.rows() {
            for (j, v) in s.row_mut(i).iter_mut().enumerate() {
                *v += lx[i] + ry[j] + b;
            }
        }
        (s, xu)
    }

    /// Returns `(dx, dy)` and accumulates parameter gradients.
    pub fn backward(
        &self,
        x: &Mat<T>,
        y: &Mat<T>,
        xu: &Mat<T>,
        ds: &Mat<T>,
        grad: &mut Biaffine<T>,
    ) -> (Mat<T>, Mat<T>) {
        let dsy = ds.matmul(y);
        grad.bilinear.add_matmul_tn(x, &dsy);
        let r = ds.row_sums();
        let c = ds.col_sums();
        let total = sum(&r);
        grad.bias.as_mut_slice()[0] += total;
        let mut dx = dsy.matmul_nt(&self.bilinear);
        for (i, &ri) in r.iter().enumerate() {
            for (j, g) in grad.left.as_mut_slice().iter_mut().enumerate() {
                *g += ri * x[(i, j)];
            }
            for (d, &l) in dx.row_mut(i).iter_mut().zip(self.left.as_slice()) {
                *d += ri * l;
            }
        }
        let mut dy = ds.matmul_tn(xu);
        for (j, &cj) in c.iter().enumerate() {
            for (k, g) in grad.right.as_mut_slice().iter_mut().enumerate() {
                *g += cj * y[(j, k)];
            }
            for (d, &rv) in dy.row_mut(j).iter_mut().zip(self.right.as_slice()) {
                *d += cj * rv;
            }
        }
        (dx, dy)
    }
}
