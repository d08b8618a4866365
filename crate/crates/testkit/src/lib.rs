//! Independent oracles and seeded generators for the test suites.
//!
//! Everything numeric in here is written from the defining formulas against
//! plain `Vec<Vec<f64>>`, on purpose: these are the reference routes the
//! production implementation is checked against, so they share no kernel code
//! with it. The only `tokreduce` types used are plumbing (weight access and
//! config shapes).

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tokreduce::vit::{EncoderWeights, ModelConfig};
use tokreduce::{Mat, Matrix};

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_matrix(rows: &Rows) -> Matrix {
    Mat::from_rows(rows).expect("rectangular input")
}

pub fn to_rows(m: &Matrix) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Rows {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * scale
                })
                .collect()
        })
        .collect()
}

/// Random row-stochastic square matrix with strictly positive entries.
pub fn random_row_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Rows {
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        })
        .collect()
}

/// Random matrix with orthonormal rows (requires n <= d).
pub fn orthonormal_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Rows {
    assert!(n <= d, "cannot fit {n} orthonormal rows in {d} dims");
    let mut rows = random_rows(rng, n, d, 1.0);
    for i in 0..n {
        for p in 0..i {
            let dot: f64 = rows[i].iter().zip(&rows[p]).map(|(a, b)| a * b).sum();
            let prev = rows[p].clone();
            for (a, b) in rows[i].iter_mut().zip(prev) {
                *a -= dot * b;
            }
        }
        let norm: f64 = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 1e-9, "degenerate random draw");
        for v in rows[i].iter_mut() {
            *v /= norm;
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// Straight-line oracle for the transform pipeline
// ---------------------------------------------------------------------------

/// Output of [`transform_pipeline_oracle`].
pub struct TransformOracle {
    pub selected: Vec<usize>,
    pub gsim: Rows,
    pub m: Rows,
    pub w: Rows,
    pub scale: Vec<f64>,
    pub y: Rows,
}

fn ceil_keep(ratio: f64, eligible: usize) -> usize {
    ((ratio * eligible as f64) - 1e-9).ceil().max(1.0) as usize
}

fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut top = order[..k].to_vec();
    top.sort_unstable();
    top
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The reduction pipeline evaluated literally, formula by formula:
/// informativeness = attention column sums; keep the top `ceil(ratio * N)`;
/// gate cosine similarity at `kappa`; column softmax `exp(tau * g) / sum`
/// without any stabilization trick; row-normalize into `w`; `y = w x`;
/// scale = row sums of `m`. No bypass handling: N tokens in, M out.
pub fn transform_pipeline_oracle(
    x: &Rows,
    attn: &Rows,
    ratio: f64,
    kappa: f64,
    tau: f64,
) -> TransformOracle {
    let n = x.len();
    // informativeness: column sums
    let mut h = vec![0.0; n];
    for row in attn {
        for (j, &v) in row.iter().enumerate() {
            h[j] += v;
        }
    }
    let selected = top_indices(&h, ceil_keep(ratio, n));
    let m_rows = selected.len();

    // gated cosine similarity, anchors x all tokens
    let mut gsim = vec![vec![0.0; n]; m_rows];
    for (i, &a) in selected.iter().enumerate() {
        for j in 0..n {
            let sim = cosine(&x[a], &x[j]);
            gsim[i][j] = if sim >= kappa { sim } else { 0.0 };
        }
    }

    // literal column softmax with temperature (tau * g <= 709, exp is safe)
    let mut m = vec![vec![0.0; n]; m_rows];
    for j in 0..n {
        let mut denom = 0.0;
        for row in gsim.iter() {
            denom += (tau * row[j]).exp();
        }
        for (mi, gi) in m.iter_mut().zip(&gsim) {
            mi[j] = (tau * gi[j]).exp() / denom;
        }
    }

    // row normalization and the weighted sum
    let mut w = vec![vec![0.0; n]; m_rows];
    let mut scale = vec![0.0; m_rows];
    for i in 0..m_rows {
        let mut s = 0.0;
        for &v in &m[i] {
            s += v;
        }
        scale[i] = s;
        for j in 0..n {
            w[i][j] = m[i][j] / s;
        }
    }
    let d = x[0].len();
    let mut y = vec![vec![0.0; d]; m_rows];
    for i in 0..m_rows {
        for j in 0..n {
            for k in 0..d {
                y[i][k] += w[i][j] * x[j][k];
            }
        }
    }
    TransformOracle {
        selected,
        gsim,
        m,
        w,
        scale,
        y,
    }
}

// ---------------------------------------------------------------------------
// Brute-force reference forwards
// ---------------------------------------------------------------------------

/// How the reference forward realizes each reduction stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferencePath {
    /// No reduction at all.
    Plain,
    /// Physically delete the dropped token rows.
    PruneDelete,
    /// Replace groups by their explicit means and carry integer counts into
    /// the attention logits.
    MergeMeans,
}

struct RawBlock {
    norm1_w: Vec<f64>,
    norm1_b: Vec<f64>,
    qkv_w: Rows,
    qkv_b: Vec<f64>,
    proj_w: Rows,
    proj_b: Vec<f64>,
    norm2_w: Vec<f64>,
    norm2_b: Vec<f64>,
    fc1_w: Rows,
    fc1_b: Vec<f64>,
    fc2_w: Rows,
    fc2_b: Vec<f64>,
}

/// Raw-vector copy of the encoder weights.
pub struct RawEncoder {
    blocks: Vec<RawBlock>,
    norm_w: Vec<f64>,
    norm_b: Vec<f64>,
    head_w: Rows,
    head_b: Vec<f64>,
    pos_embed: Rows,
}

pub fn raw_encoder(weights: &EncoderWeights<f64>) -> RawEncoder {
    let rows = |m: &Matrix| to_rows(m);
    RawEncoder {
        blocks: weights
            .blocks
            .iter()
            .map(|b| RawBlock {
                norm1_w: b.norm1_w.clone(),
                norm1_b: b.norm1_b.clone(),
                qkv_w: rows(&b.qkv_w),
                qkv_b: b.qkv_b.clone(),
                proj_w: rows(&b.proj_w),
                proj_b: b.proj_b.clone(),
                norm2_w: b.norm2_w.clone(),
                norm2_b: b.norm2_b.clone(),
                fc1_w: rows(&b.fc1_w),
                fc1_b: b.fc1_b.clone(),
                fc2_w: rows(&b.fc2_w),
                fc2_b: b.fc2_b.clone(),
            })
            .collect(),
        norm_w: weights.norm_w.clone(),
        norm_b: weights.norm_b.clone(),
        head_w: rows(&weights.head_w),
        head_b: weights.head_b.clone(),
        pos_embed: rows(&weights.pos_embed),
    }
}

const LN_EPS: f64 = 1e-6;

fn layernorm_raw(x: &Rows, g: &[f64], b: &[f64]) -> Rows {
    x.iter()
        .map(|row| {
            let d = row.len() as f64;
            let mut mean = 0.0;
            for &v in row {
                mean += v;
            }
            mean /= d;
            let mut var = 0.0;
            for &v in row {
                let c = v - mean;
                var += c * c;
            }
            var /= d;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            row.iter()
                .enumerate()
                .map(|(k, &v)| (v - mean) * inv * g[k] + b[k])
                .collect()
        })
        .collect()
}

// x (N x K) times w^T where w is (O x K), plus bias.
fn linear_raw(x: &Rows, w: &Rows, b: &[f64]) -> Rows {
    x.iter()
        .map(|row| {
            w.iter()
                .enumerate()
                .map(|(o, wrow)| {
                    let mut acc = 0.0;
                    for (&xv, &wv) in row.iter().zip(wrow) {
                        acc += xv * wv;
                    }
                    acc + b[o]
                })
                .collect()
        })
        .collect()
}

fn gelu_raw(x: &mut Rows) {
    for row in x {
        for v in row {
            let t = (0.797_884_560_802_865_4 * (*v + 0.044_715 * *v * *v * *v)).tanh();
            *v = 0.5 * *v * (1.0 + t);
        }
    }
}

// Standard pre-norm attention; `counts`, when given, enters the key logits
// as log(count_j). Returns the post-residual tokens and the head-averaged map.
fn attention_raw(
    x: &Rows,
    counts: Option<&[f64]>,
    block: &RawBlock,
    heads: usize,
) -> (Rows, Rows) {
    let n = x.len();
    let d = x[0].len();
    let dh = d / heads;
    let inv_sqrt = 1.0 / (dh as f64).sqrt();
    let normed = layernorm_raw(x, &block.norm1_w, &block.norm1_b);
    let qkv = linear_raw(&normed, &block.qkv_w, &block.qkv_b);

    let mut concat = vec![vec![0.0; d]; n];
    let mut attn_sum = vec![vec![0.0; n]; n];
    for h in 0..heads {
        let q0 = h * dh;
        let k0 = d + h * dh;
        let v0 = 2 * d + h * dh;
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut dot = 0.0;
                for t in 0..dh {
                    dot += qkv[i][q0 + t] * qkv[j][k0 + t];
                }
                let mut l = dot * inv_sqrt;
                if let Some(c) = counts {
                    l += c[j].ln();
                }
                a[i][j] = l;
            }
            let max = a[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in a[i].iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in a[i].iter_mut() {
                *v /= sum;
            }
        }
        for i in 0..n {
            for t in 0..dh {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += a[i][j] * qkv[j][v0 + t];
                }
                concat[i][q0 + t] = acc;
            }
            for j in 0..n {
                attn_sum[i][j] += a[i][j];
            }
        }
    }
    let inv_heads = 1.0 / heads as f64;
    for row in attn_sum.iter_mut() {
        for v in row {
            *v *= inv_heads;
        }
    }
    let proj = linear_raw(&concat, &block.proj_w, &block.proj_b);
    let out = x
        .iter()
        .zip(&proj)
        .map(|(xr, pr)| xr.iter().zip(pr).map(|(a, b)| a + b).collect())
        .collect();
    (out, attn_sum)
}

fn select_raw(h: &[f64], ratio: f64, bypass: Option<usize>) -> Vec<usize> {
    let eligible: Vec<usize> = (0..h.len()).filter(|&i| Some(i) != bypass).collect();
    let values: Vec<f64> = eligible.iter().map(|&i| h[i]).collect();
    let k = ceil_keep(ratio, eligible.len());
    top_indices(&values, k)
        .into_iter()
        .map(|p| eligible[p])
        .collect()
}

/// Brute-force encoder pass. Returns (logits, final feature, stage token
/// counts). The class token (index 0) is always carried through unreduced.
pub fn reference_forward(
    enc: &RawEncoder,
    cfg: &ModelConfig,
    path: ReferencePath,
    x: &Rows,
) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    assert!(cfg.has_class_token, "reference paths assume a class token");
    let mut tokens: Rows = x
        .iter()
        .zip(&enc.pos_embed)
        .map(|(xr, pr)| xr.iter().zip(pr).map(|(a, b)| a + b).collect())
        .collect();
    let mut counts: Vec<f64> = vec![1.0; tokens.len()];
    let mut stage_counts = vec![tokens.len()];

    for layer in 0..cfg.layers {
        let block = &enc.blocks[layer];
        let with_counts = matches!(path, ReferencePath::MergeMeans);
        let (after_attn, attn_mean) = attention_raw(
            &tokens,
            with_counts.then_some(counts.as_slice()),
            block,
            cfg.heads,
        );
        tokens = after_attn;

        if path != ReferencePath::Plain && cfg.reduce_at.contains(&layer) {
            let n = tokens.len();
            let mut h = vec![0.0; n];
            for row in &attn_mean {
                for (j, &v) in row.iter().enumerate() {
                    h[j] += v;
                }
            }
            let anchors = select_raw(&h, cfg.reducer.keep_ratio, Some(0));
            match path {
                ReferencePath::PruneDelete => {
                    let mut keep = vec![0usize];
                    keep.extend(&anchors);
                    tokens = keep.iter().map(|&i| tokens[i].clone()).collect();
                    counts = vec![1.0; tokens.len()];
                }
                ReferencePath::MergeMeans => {
                    // assign every non-anchor patch token to its most similar
                    // anchor (ties to the lowest anchor index)
                    let mut groups: Vec<Vec<usize>> = anchors.iter().map(|&a| vec![a]).collect();
                    for j in 1..n {
                        if anchors.contains(&j) {
                            continue;
                        }
                        let mut best = 0;
                        let mut best_sim = f64::NEG_INFINITY;
                        for (gi, &a) in anchors.iter().enumerate() {
                            let sim = cosine(&tokens[a], &tokens[j]);
                            if sim > best_sim {
                                best_sim = sim;
                                best = gi;
                            }
                        }
                        groups[best].push(j);
                    }
                    let d = tokens[0].len();
                    let mut new_tokens: Rows = vec![tokens[0].clone()];
                    let mut new_counts = vec![1.0];
                    for group in &groups {
                        let mut mean = vec![0.0; d];
                        let mut cnt = 0.0;
                        for &idx in group {
                            for (m, &v) in mean.iter_mut().zip(&tokens[idx]) {
                                *m += v;
                            }
                            cnt += counts[idx];
                        }
                        for m in mean.iter_mut() {
                            *m /= group.len() as f64;
                        }
                        new_tokens.push(mean);
                        new_counts.push(cnt);
                    }
                    tokens = new_tokens;
                    counts = new_counts;
                }
                ReferencePath::Plain => unreachable!(),
            }
            stage_counts.push(tokens.len());
        }

        let normed = layernorm_raw(&tokens, &block.norm2_w, &block.norm2_b);
        let mut hidden = linear_raw(&normed, &block.fc1_w, &block.fc1_b);
        gelu_raw(&mut hidden);
        let mlp_out = linear_raw(&hidden, &block.fc2_w, &block.fc2_b);
        for (t, m) in tokens.iter_mut().zip(&mlp_out) {
            for (a, &b) in t.iter_mut().zip(m) {
                *a += b;
            }
        }
    }

    let final_tokens = layernorm_raw(&tokens, &enc.norm_w, &enc.norm_b);
    let feature = final_tokens[0].clone();
    let logits: Vec<f64> = enc
        .head_w
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let mut acc = 0.0;
            for (&w, &f) in row.iter().zip(&feature) {
                acc += w * f;
            }
            acc + enc.head_b[c]
        })
        .collect();
    (logits, feature, stage_counts)
}

/// Partition induced by hardening each column of an assignment matrix to a
/// one-hot at its argmax row (ties to the lowest row).
pub fn argmax_partition(m: &Rows) -> Vec<Vec<usize>> {
    let rows = m.len();
    let cols = m[0].len();
    let mut groups = vec![Vec::new(); rows];
    for j in 0..cols {
        let mut best = 0;
        for (i, row) in m.iter().enumerate().skip(1) {
            if row[j] > m[best][j] {
                best = i;
            }
        }
        groups[best].push(j);
    }
    groups
}

/// Max absolute difference between two row collections.
pub fn max_abs_diff(a: &Rows, b: &Rows) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        assert_eq!(ra.len(), rb.len());
        for (&x, &y) in ra.iter().zip(rb) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

pub fn max_abs_diff_vec(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
