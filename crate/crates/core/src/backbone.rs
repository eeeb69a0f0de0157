//! Compare-aggregate backbone: gated encoding, co-attention with soft
//! alignment, element-wise comparison and CNN aggregation.
//!
//! The encoder and the interaction layer are shared by all ranking levels;
//! every level owns its own [`AggregatorParams`].

use crate::diff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use rand::Rng;

/// Glorot-uniform matrix.
pub(crate) fn xavier(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect())
}

/// Parameters of `H = σ(E·W1 + b1) ⊙ tanh(E·W2 + b2)`, shared by the
/// question and answer sides.
#[derive(Clone, Debug)]
pub struct EncoderParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl EncoderParams {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, emb_dim: usize, hidden: usize) -> Self {
        EncoderParams {
            w1: store.add("encoder.w1", xavier(rng, emb_dim, hidden), true),
            b1: store.add("encoder.b1", Tensor::zeros(1, hidden), true),
            w2: store.add("encoder.w2", xavier(rng, emb_dim, hidden), true),
            b2: store.add("encoder.b2", Tensor::zeros(1, hidden), true),
        }
    }

    pub fn ids(&self) -> [ParamId; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

/// One convolution per kernel size. Filters are stored unfolded as
/// `[size·in_dim × channels]` so a window row times the filter is the
/// convolution output at that position.
#[derive(Clone, Debug)]
pub struct AggregatorParams {
    pub kernels: Vec<ConvKernel>,
    pub channels: usize,
}

#[derive(Clone, Debug)]
pub struct ConvKernel {
    pub size: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl AggregatorParams {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        prefix: &str,
        in_dim: usize,
        channels: usize,
        kernel_sizes: &[usize],
    ) -> Self {
        let kernels = kernel_sizes
            .iter()
            .map(|&size| ConvKernel {
                size,
                weight: store.add(format!("{prefix}.conv{size}.w"), xavier(rng, size * in_dim, channels), true),
                bias: store.add(format!("{prefix}.conv{size}.b"), Tensor::zeros(1, channels), true),
            })
            .collect();
        AggregatorParams { kernels, channels }
    }

    /// Length of the pooled vector for one side.
    pub fn side_dim(&self) -> usize {
        self.channels * self.kernels.len()
    }

    /// Length of `[r^q ; r^a]`.
    pub fn output_dim(&self) -> usize {
        2 * self.side_dim()
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.kernels.iter().flat_map(|k| [k.weight, k.bias]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct AttentionConfig {
    pub kmax_enabled: bool,
    pub k: usize,
}

impl AttentionConfig {
    pub fn disabled() -> Self {
        AttentionConfig { kmax_enabled: false, k: 10 }
    }

    pub fn kmax(k: usize) -> Self {
        AttentionConfig { kmax_enabled: true, k }
    }
}

pub fn gated_projection(g: &mut Graph, store: &ParamStore, e: Var, p: &EncoderParams) -> Result<Var> {
    if g.shape(e).0 == 0 {
        return Err(Error::EmptySentence);
    }
    let w1 = g.param(store, p.w1);
    let b1 = g.param(store, p.b1);
    let w2 = g.param(store, p.w2);
    let b2 = g.param(store, p.b2);
    let z1 = g.matmul(e, w1)?;
    let z1 = g.add_row(z1, b1)?;
    let gate = g.sigmoid(z1);
    let z2 = g.matmul(e, w2)?;
    let z2 = g.add_row(z2, b2)?;
    let cand = g.tanh(z2);
    Ok(g.mul(gate, cand)?)
}

/// Soft alignment of each side against the other.
#[derive(Clone, Copy, Debug)]
pub struct Alignment {
    /// `softmax(M)·Ha`, `[n × h]`
    pub question: Var,
    /// `softmax(Mᵀ)·Hq`, `[m × h]`
    pub answer: Var,
    /// `Hq·Haᵀ`, `[n × m]`
    pub scores: Var,
}

/// Flags keeping the `k` largest entries of every row; ties favour the
/// lower column index.
pub fn top_k_mask(t: &Tensor, k: usize) -> Vec<bool> {
    let mut keep = vec![false; t.len()];
    let cols = t.cols();
    for r in 0..t.rows() {
        let row = t.row(r);
        let mut idx: Vec<usize> = (0..cols).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        for &c in idx.iter().take(k) {
            keep[r * cols + c] = true;
        }
    }
    keep
}

fn attention_weights(g: &mut Graph, scores: Var, cfg: AttentionConfig, valid: Option<&[bool]>) -> Result<Var> {
    let (rows, cols) = g.shape(scores);
    let mut keep = vec![true; rows * cols];
    if let Some(valid) = valid {
        // padded target positions are never attended to
        for (i, k) in keep.iter_mut().enumerate() {
            *k = valid[i % cols];
        }
    }
    if cfg.kmax_enabled && cfg.k < cols {
        let mut visible = g.value(scores).clone();
        for (x, &k) in visible.data_mut().iter_mut().zip(&keep) {
            if !k {
                *x = f64::NEG_INFINITY;
            }
        }
        for (k, top) in keep.iter_mut().zip(top_k_mask(&visible, cfg.k)) {
            *k &= top;
        }
    }
    let masked = if keep.iter().all(|&k| k) { scores } else { g.mask(scores, keep)? };
    Ok(g.row_softmax(masked)?)
}

pub fn attend_align(g: &mut Graph, hq: Var, ha: Var, cfg: AttentionConfig) -> Result<Alignment> {
    attend_align_masked(g, hq, ha, cfg, None, None)
}

/// Same as [`attend_align`] for padded inputs; `q_valid`/`a_valid` flag the
/// real (non-padding) rows of each side.
pub fn attend_align_masked(
    g: &mut Graph,
    hq: Var,
    ha: Var,
    cfg: AttentionConfig,
    q_valid: Option<&[bool]>,
    a_valid: Option<&[bool]>,
) -> Result<Alignment> {
    let (n, hq_dim) = g.shape(hq);
    let (m, ha_dim) = g.shape(ha);
    if n == 0 || m == 0 {
        return Err(Error::EmptySentence);
    }
    if hq_dim != ha_dim {
        return Err(crate::diff::DiffError::Shape { op: "attend_align", left: (n, hq_dim), right: (m, ha_dim) }.into());
    }
    if cfg.kmax_enabled && cfg.k == 0 {
        return Err(Error::Config("k-max attention needs k >= 1".into()));
    }
    let scores = g.matmul_nt(hq, ha)?;
    let wq = attention_weights(g, scores, cfg, a_valid)?;
    let question = g.matmul(wq, ha)?;
    let scores_t = g.transpose(scores);
    let wa = attention_weights(g, scores_t, cfg, q_valid)?;
    let answer = g.matmul(wa, hq)?;
    Ok(Alignment { question, answer, scores })
}

/// `C = Ĥ ⊙ H`.
pub fn compare(g: &mut Graph, aligned: Var, h: Var) -> Result<Var> {
    Ok(g.mul(aligned, h)?)
}

/// Convolution (tanh activation) and max-over-time pooling for every kernel
/// size, concatenated: `[len × in] → [1 × channels·|kernels|]`.
pub fn aggregate_side(g: &mut Graph, store: &ParamStore, c: Var, p: &AggregatorParams) -> Result<Var> {
    if g.shape(c).0 == 0 {
        return Err(Error::EmptySentence);
    }
    let mut pooled = Vec::with_capacity(p.kernels.len());
    for k in &p.kernels {
        let windows = g.unfold(c, k.size)?;
        let w = g.param(store, k.weight);
        let b = g.param(store, k.bias);
        let conv = g.matmul(windows, w)?;
        let conv = g.add_row(conv, b)?;
        let act = g.tanh(conv);
        pooled.push(g.max_over_time(act)?);
    }
    Ok(g.concat_cols(&pooled)?)
}

/// Matching vector `r = [r^q ; r^a]`.
pub fn aggregate(g: &mut Graph, store: &ParamStore, cq: Var, ca: Var, p: &AggregatorParams) -> Result<Var> {
    let rq = aggregate_side(g, store, cq, p)?;
    let ra = aggregate_side(g, store, ca, p)?;
    Ok(g.concat_cols(&[rq, ra])?)
}
