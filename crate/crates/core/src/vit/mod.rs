//! Minimal pre-norm ViT encoder with reduction stages.
//!
//! Block layout: `x = x + attn(norm1(x))`, then an optional reduction stage
//! consuming the post-residual tokens and this layer's head-averaged
//! attention map, then `x = x + mlp(norm2(x))`. Attention adds `log s` to
//! the key logits so that tokens standing in for more original tokens weigh
//! proportionally more; before any reduction `s` is all ones and the term
//! vanishes, so an unreduced forward is bit-identical to a plain encoder.
//!
//! Scale propagation across stages is `s_new = m * s_old`. Transform and
//! merge assignments are column-stochastic, so they redistribute the full
//! token budget (`sum(s) = N`); merge degenerates to integer token counts.
//! Pruning gathers the kept scales and sheds the rest, which is exactly the
//! information loss pruning accepts.

mod weights;

pub use weights::{
    synthetic_inputs, tensor_specs, BlockWeights, EncoderWeights, Tensor, WeightStore,
    WEIGHT_FORMAT,
};

use serde::{Deserialize, Serialize};

use crate::numkern::{self, Mat, Real};
use crate::reducer::{self, ReduceMode, ReducerConfig, Reduction};
use crate::{Error, Result};

const LN_EPS: f64 = 1e-6;

/// Encoder shape plus the reduction schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub dim: usize,
    pub heads: usize,
    pub mlp_ratio: f64,
    /// Total sequence length, class token included when present.
    pub tokens: usize,
    pub has_class_token: bool,
    pub num_classes: usize,
    /// Layers (0-indexed) after whose attention a reduction stage runs.
    pub reduce_at: Vec<usize>,
    pub reducer: ReducerConfig,
}

impl ModelConfig {
    fn deit(dim: usize, heads: usize) -> Self {
        ModelConfig {
            layers: 12,
            dim,
            heads,
            mlp_ratio: 4.0,
            tokens: 197,
            has_class_token: true,
            num_classes: 1000,
            reduce_at: vec![3, 6, 9],
            reducer: ReducerConfig::default(),
        }
    }

    pub fn deit_tiny() -> Self {
        Self::deit(192, 3)
    }

    pub fn deit_small() -> Self {
        Self::deit(384, 6)
    }

    pub fn deit_base() -> Self {
        Self::deit(768, 12)
    }

    /// Conventional three-stage schedule at depth/4, depth/2, 3*depth/4
    /// (gives {3, 6, 9} for 12-layer models).
    pub fn default_reduce_at(layers: usize) -> Vec<usize> {
        let mut at: Vec<usize> = [layers / 4, layers / 2, 3 * layers / 4]
            .into_iter()
            .filter(|&l| l > 0 && l < layers)
            .collect();
        at.dedup();
        at
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn mlp_hidden(&self) -> usize {
        (self.mlp_ratio * self.dim as f64).round() as usize
    }

    /// Token count excluding the class token.
    pub fn patch_tokens(&self) -> usize {
        self.tokens - usize::from(self.has_class_token)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.dim == 0 || self.heads == 0 || self.num_classes == 0 {
            return Err(Error::InvalidArgument(
                "layers, dim, heads and num_classes must be positive".into(),
            ));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidArgument(format!(
                "dim {} is not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if self.tokens <= usize::from(self.has_class_token) {
            return Err(Error::InvalidArgument(
                "at least one patch token is required".into(),
            ));
        }
        if self.mlp_hidden() == 0 {
            return Err(Error::InvalidArgument(format!(
                "mlp_ratio {} collapses the hidden layer",
                self.mlp_ratio
            )));
        }
        for pair in self.reduce_at.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidArgument(
                    "reduce_at must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = self.reduce_at.last() {
            if last >= self.layers {
                return Err(Error::InvalidArgument(format!(
                    "reduce_at layer {} out of range for {} layers",
                    last, self.layers
                )));
            }
        }
        self.reducer.validate()
    }
}

/// Per-layer forward record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer: usize,
    pub tokens_in: usize,
    pub tokens_out: usize,
    pub reduced: bool,
    /// Mean row entropy (nats) of the head-averaged attention map.
    pub attn_entropy: f64,
}

/// One executed reduction stage together with the layer it ran in.
#[derive(Clone, Debug)]
pub struct StageReduction<R: Real> {
    pub layer: usize,
    pub reduction: Reduction<R>,
}

/// Everything the forward pass recorded along the way.
#[derive(Clone, Debug)]
pub struct Trace<R: Real = f64> {
    pub layers: Vec<LayerRecord>,
    /// Token count at input and after every reduction stage,
    /// e.g. `[197, 139, 98, 69]` for DeiT-S at ratio 0.7.
    pub stage_token_counts: Vec<usize>,
    pub reductions: Vec<StageReduction<R>>,
}

impl<R: Real> Trace<R> {
    fn new(initial_tokens: usize) -> Self {
        Trace {
            layers: Vec::new(),
            stage_token_counts: vec![initial_tokens],
            reductions: Vec::new(),
        }
    }
}

/// Tokens, their scale vector and the trace, threaded through the blocks.
#[derive(Clone, Debug)]
pub struct ForwardState<R: Real = f64> {
    pub tokens: Mat<R>,
    pub scale: Vec<R>,
    pub trace: Trace<R>,
}

/// Result of a full encoder pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput<R: Real = f64> {
    pub logits: Vec<R>,
    /// Post-final-norm class token (or mean-pooled tokens without one).
    pub feature: Vec<R>,
    pub trace: Trace<R>,
}

/// Pre-norm multi-head self-attention with scaling adaptation.
///
/// Per head: `A = softmax(Q K^T / sqrt(d_head) + log s)` with `log s`
/// broadcast across rows (added to the key logits), so a constant scale
/// vector reproduces standard attention exactly (softmax shift invariance).
/// Returns the post-residual tokens and the head-averaged attention map.
pub fn scaled_attention<R: Real>(
    x: &Mat<R>,
    scale: &[R],
    block: &BlockWeights<R>,
    heads: usize,
) -> Result<(Mat<R>, Mat<R>)> {
    let n = x.rows();
    let d = x.cols();
    if scale.len() != n {
        return Err(Error::Dimension(format!(
            "scale length {} vs {} tokens",
            scale.len(),
            n
        )));
    }
    if scale.iter().any(|s: &R| s.is_nan() || *s <= R::zero()) {
        return Err(Error::Contract(
            "scale entries must be positive (log is taken)".into(),
        ));
    }
    if !d.is_multiple_of(heads) {
        return Err(Error::Dimension(format!(
            "dim {d} not divisible by {heads} heads"
        )));
    }
    let dh = d / heads;
    let inv_sqrt = R::from_f64(1.0 / (dh as f64).sqrt());
    let log_s: Vec<R> = scale.iter().map(|s| s.ln()).collect();

    let normed = numkern::layernorm(x, &block.norm1_w, &block.norm1_b, R::from_f64(LN_EPS))?;
    let mut qkv = numkern::matmul_nt(&normed, &block.qkv_w)?;
    numkern::add_bias_rows(&mut qkv, &block.qkv_b)?;

    let mut concat = Mat::zeros(n, d);
    let mut attn_sum = Mat::zeros(n, n);
    for h in 0..heads {
        let q = qkv.slice_cols(h * dh, (h + 1) * dh);
        let k = qkv.slice_cols(d + h * dh, d + (h + 1) * dh);
        let v = qkv.slice_cols(2 * d + h * dh, 2 * d + (h + 1) * dh);
        let mut logits = numkern::matmul_nt(&q, &k)?;
        for i in 0..n {
            for (j, l) in logits.row_mut(i).iter_mut().enumerate() {
                *l = *l * inv_sqrt + log_s[j];
            }
        }
        let a = numkern::softmax_rows(&logits, R::one())?;
        let av = numkern::matmul(&a, &v)?;
        for i in 0..n {
            concat.row_mut(i)[h * dh..(h + 1) * dh].copy_from_slice(av.row(i));
        }
        for i in 0..n {
            for (acc, &val) in attn_sum.row_mut(i).iter_mut().zip(a.row(i)) {
                *acc += val;
            }
        }
    }
    let inv_heads = R::from_f64(1.0 / heads as f64);
    let attn_mean = attn_sum.map(|v| v * inv_heads);

    let mut proj = numkern::matmul_nt(&concat, &block.proj_w)?;
    numkern::add_bias_rows(&mut proj, &block.proj_b)?;
    let out = numkern::add(x, &proj)?;
    Ok((out, attn_mean))
}

fn mean_row_entropy<R: Real>(a: &Mat<R>) -> f64 {
    let mut total = 0.0;
    for i in 0..a.rows() {
        let mut h = 0.0;
        for &p in a.row(i) {
            let p = p.as_f64();
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
        total += h;
    }
    total / a.rows() as f64
}

/// One block: scaled attention + residual, an optional reduction stage,
/// then the MLP + residual.
pub fn block_forward<R: Real>(
    state: ForwardState<R>,
    layer: usize,
    cfg: &ModelConfig,
    weights: &EncoderWeights<R>,
) -> Result<ForwardState<R>> {
    let block = weights
        .blocks
        .get(layer)
        .ok_or_else(|| Error::InvalidArgument(format!("layer {layer} out of range")))?;
    let tokens_in = state.tokens.rows();
    let (after_attn, attn_mean) = scaled_attention(&state.tokens, &state.scale, block, cfg.heads)?;
    let attn_entropy = mean_row_entropy(&attn_mean);

    let mut trace = state.trace;
    let mut scale = state.scale;
    let mut tokens = after_attn;
    let mut reduced = false;
    if cfg.reduce_at.contains(&layer) && cfg.reducer.mode != ReduceMode::None {
        let bypass = (cfg.has_class_token && cfg.reducer.class_token_bypass).then_some(0);
        let red = reducer::reduce(&tokens, &attn_mean, &cfg.reducer, bypass)?;
        scale = numkern::matvec(&red.m, &scale)?;
        tokens = red.y.clone();
        if tokens.rows() != tokens_in {
            // the count trajectory only records stages that actually shrink
            // (ratio 1.0 transforms tokens but keeps the count)
            trace.stage_token_counts.push(tokens.rows());
        }
        trace.reductions.push(StageReduction {
            layer,
            reduction: red,
        });
        reduced = true;
    }

    let normed = numkern::layernorm(&tokens, &block.norm2_w, &block.norm2_b, R::from_f64(LN_EPS))?;
    let mut hidden = numkern::matmul_nt(&normed, &block.fc1_w)?;
    numkern::add_bias_rows(&mut hidden, &block.fc1_b)?;
    let hidden = numkern::gelu(&hidden);
    let mut mlp_out = numkern::matmul_nt(&hidden, &block.fc2_w)?;
    numkern::add_bias_rows(&mut mlp_out, &block.fc2_b)?;
    tokens = numkern::add(&tokens, &mlp_out)?;

    trace.layers.push(LayerRecord {
        layer,
        tokens_in,
        tokens_out: tokens.rows(),
        reduced,
        attn_entropy,
    });
    Ok(ForwardState {
        tokens,
        scale,
        trace,
    })
}

/// Full encoder pass: positional embedding, all blocks, final norm, and the
/// classifier head on the class token (or the token mean without one).
pub fn forward<R: Real>(
    x: &Mat<R>,
    weights: &EncoderWeights<R>,
    cfg: &ModelConfig,
) -> Result<ForwardOutput<R>> {
    cfg.validate()?;
    if x.rows() != cfg.tokens || x.cols() != cfg.dim {
        return Err(Error::Dimension(format!(
            "input is {}x{}, config wants {}x{}",
            x.rows(),
            x.cols(),
            cfg.tokens,
            cfg.dim
        )));
    }
    let tokens = numkern::add(x, &weights.pos_embed)?;
    let mut state = ForwardState {
        tokens,
        scale: vec![R::one(); cfg.tokens],
        trace: Trace::new(cfg.tokens),
    };
    for layer in 0..cfg.layers {
        state = block_forward(state, layer, cfg, weights)?;
    }
    let final_tokens =
        numkern::layernorm(&state.tokens, &weights.norm_w, &weights.norm_b, R::from_f64(LN_EPS))?;
    let feature: Vec<R> = if cfg.has_class_token {
        final_tokens.row(0).to_vec()
    } else {
        let n = R::from_f64(final_tokens.rows() as f64);
        (0..final_tokens.cols())
            .map(|j| {
                let mut acc = R::zero();
                for i in 0..final_tokens.rows() {
                    acc += final_tokens.get(i, j);
                }
                acc / n
            })
            .collect()
    };
    let mut logits = numkern::matvec(&weights.head_w, &feature)?;
    for (l, &b) in logits.iter_mut().zip(&weights.head_b) {
        *l += b;
    }
    Ok(ForwardOutput {
        logits,
        feature,
        trace: state.trace,
    })
}

/// Mean relative L2 distance between the final-layer class token of a reduced
/// forward and of the reduction-free forward on identical weights and inputs.
pub fn class_token_error<R: Real>(
    weights: &EncoderWeights<R>,
    cfg: &ModelConfig,
    inputs: &[Mat<R>],
) -> Result<f64> {
    if !cfg.has_class_token {
        return Err(Error::InvalidArgument(
            "class token error needs a class token".into(),
        ));
    }
    let mut full_cfg = cfg.clone();
    full_cfg.reducer.mode = ReduceMode::None;
    let mut total = 0.0;
    for x in inputs {
        let reduced = forward(x, weights, cfg)?;
        let full = forward(x, weights, &full_cfg)?;
        total += relative_l2(&reduced.feature, &full.feature);
    }
    Ok(total / inputs.len() as f64)
}

/// `||a - b||_2 / ||b||_2`, the normalization used for class-token error.
pub fn relative_l2<R: Real>(a: &[R], b: &[R]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x.as_f64() - y.as_f64();
        num += d * d;
        den += y.as_f64() * y.as_f64();
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}
