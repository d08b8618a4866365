//! Construction of the token transformation matrix.
//!
//! The pipeline: column sums of the attention map rank token informativeness,
//! the top tokens become anchors, gated cosine similarity between anchors and
//! all tokens is normalized column-wise into a soft assignment matrix `m`
//! (each original token distributes itself across anchors), and row
//! normalization of `m` yields the row-stochastic transformation `W` with
//! `Y = W * X`. Row sums of `m` are the scale vector `s` fed back into
//! attention as a soft token quantity.
//!
//! Pruning and merging fall out as degenerate `W` shapes: one-hot rows select
//! tokens, block-wise rows average disjoint groups. [`prune_matrix`] and
//! [`merge_matrix`] build those directly and double as oracles for the
//! degeneration tests.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::numkern::{self, Mat, Real};
use crate::{Error, Result};

/// How a reduction stage maps N tokens to M.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReduceMode {
    /// Dense many-to-many transformation matrix.
    Transform,
    /// Keep the selected tokens, drop the rest (diagonal W).
    Prune,
    /// Hard-assign every token to its most similar anchor and average
    /// (block-wise W).
    Merge,
    /// Identity; no reduction.
    None,
}

impl std::fmt::Display for ReduceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ReduceMode::Transform => "transform",
            ReduceMode::Prune => "prune",
            ReduceMode::Merge => "merge",
            ReduceMode::None => "none",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ReduceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transform" => Ok(ReduceMode::Transform),
            "prune" => Ok(ReduceMode::Prune),
            "merge" => Ok(ReduceMode::Merge),
            "none" => Ok(ReduceMode::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?} (expected transform|prune|merge|none)"
            ))),
        }
    }
}

/// Hyper-parameters of a reduction stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducerConfig {
    /// Fraction of eligible tokens kept per stage, in (0, 1].
    pub keep_ratio: f64,
    /// Similarity gate threshold in [-1, 1]; pairs below it contribute no
    /// similarity.
    pub kappa: f64,
    /// Softmax temperature for assignment normalization, > 0.
    pub tau: f64,
    pub mode: ReduceMode,
    /// Keep the class token out of selection/assignment and re-attach it
    /// unchanged with scale 1.
    pub class_token_bypass: bool,
}

impl Default for ReducerConfig {
    fn default() -> Self {
        ReducerConfig {
            keep_ratio: 0.7,
            kappa: 0.5,
            tau: 150.0,
            mode: ReduceMode::Transform,
            class_token_bypass: true,
        }
    }
}

impl ReducerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keep_ratio > 0.0 && self.keep_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "keep ratio must be in (0, 1], got {}",
                self.keep_ratio
            )));
        }
        if !(-1.0..=1.0).contains(&self.kappa) {
            return Err(Error::InvalidArgument(format!(
                "kappa must be in [-1, 1], got {}",
                self.kappa
            )));
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tau must be > 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// One reduction stage: the matrices that map N tokens to M.
///
/// Invariants (checked by the test suites):
/// - rows of `w` sum to 1 and are non-negative;
/// - columns of `m` sum to 1;
/// - `scale[i]` equals the i-th row sum of `m`, all positive, summing to N;
/// - `selected` is strictly increasing, one entry per output row.
#[derive(Clone, Debug)]
pub struct Reduction<R: Real = f64> {
    /// Row-stochastic transformation, MxN.
    pub w: Mat<R>,
    /// Raw column-stochastic assignment, MxN.
    pub m: Mat<R>,
    /// Soft token quantity per output token, length M.
    pub scale: Vec<R>,
    /// Anchor token indices (into the input), ascending, length M.
    pub selected: Vec<usize>,
    /// Transformed tokens `w * x`, Mxd.
    pub y: Mat<R>,
}

impl<R: Real> Reduction<R> {
    pub fn tokens_in(&self) -> usize {
        self.w.cols()
    }

    pub fn tokens_out(&self) -> usize {
        self.w.rows()
    }

    /// Dumps `w` as `row,col,value` CSV for external heatmap rendering.
    pub fn write_w_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for i in 0..self.w.rows() {
            for j in 0..self.w.cols() {
                writeln!(out, "{},{},{}", i, j, self.w.get(i, j).as_f64())?;
            }
        }
        Ok(())
    }

    /// Dumps the scale vector as `index,value` CSV.
    pub fn write_scale_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "index,value")?;
        for (i, s) in self.scale.iter().enumerate() {
            writeln!(out, "{},{}", i, s.as_f64())?;
        }
        Ok(())
    }
}

/// Informativeness of each token: column sums of a row-stochastic attention
/// map. A token that receives much attention from the others scores high.
pub fn informativeness<R: Real>(attn: &Mat<R>) -> Result<Vec<R>> {
    let n = attn.rows();
    if attn.cols() != n {
        return Err(Error::Dimension(format!(
            "attention map must be square, got {}x{}",
            n,
            attn.cols()
        )));
    }
    for i in 0..n {
        let sum: f64 = attn.row(i).iter().map(|v| v.as_f64()).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "attention row {i} sums to {sum}, expected 1 within 1e-6"
            )));
        }
    }
    let mut h = vec![R::zero(); n];
    for i in 0..n {
        for (j, &v) in attn.row(i).iter().enumerate() {
            h[j] += v;
        }
    }
    Ok(h)
}

// Ceiling with a tiny downward nudge so that fp noise in ratio * n cannot
// push an exact integer product up to the next one.
fn keep_count(ratio: f64, eligible: usize) -> usize {
    if eligible == 0 {
        return 0;
    }
    ((ratio * eligible as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Picks the `ceil(ratio * eligible)` most informative token indices, where
/// `eligible` excludes the bypass index (class token). Ties break toward the
/// lowest index; the result is ascending. The bypass index is never selected.
pub fn select_informative<R: Real>(
    h: &[R],
    keep_ratio: f64,
    bypass: Option<usize>,
) -> Result<Vec<usize>> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep ratio must be in (0, 1], got {keep_ratio}"
        )));
    }
    if let Some(b) = bypass {
        if b >= h.len() {
            return Err(Error::InvalidArgument(format!(
                "bypass index {b} out of range for {} tokens",
                h.len()
            )));
        }
    }
    let eligible: Vec<usize> = (0..h.len()).filter(|&i| Some(i) != bypass).collect();
    let m = keep_count(keep_ratio, eligible.len());
    let compact: Vec<R> = eligible.iter().map(|&i| h[i]).collect();
    let top = numkern::topk_indices(&compact, m)?;
    Ok(top.into_iter().map(|k| eligible[k]).collect())
}

/// Gated cosine similarity between anchor tokens and all tokens: values below
/// `kappa` are zeroed, so only the strongest affinities survive. MxN.
pub fn gate_similarity<R: Real>(
    tokens: &Mat<R>,
    selected: &[usize],
    kappa: f64,
) -> Result<Mat<R>> {
    if !(-1.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidArgument(format!(
            "kappa must be in [-1, 1], got {kappa}"
        )));
    }
    let anchors = tokens.gather_rows(selected)?;
    let sim = numkern::cosine_sim(&anchors, tokens)?;
    let k = R::from_f64(kappa);
    Ok(sim.map(|v| if v >= k { v } else { R::zero() }))
}

/// Assignment normalization: column-wise softmax with temperature over the
/// gated similarities. Gated zeros participate as exp(0); at the default
/// temperature of 150 their relative weight is negligible.
pub fn assignment_matrix<R: Real>(gsim: &Mat<R>, tau: f64) -> Result<Mat<R>> {
    numkern::softmax_cols(gsim, R::from_f64(tau))
}

/// Row-normalizes the assignment into the transformation `W`, applies it, and
/// reads the scale vector off the row sums of `m`.
pub fn transform<R: Real>(tokens: &Mat<R>, m: &Mat<R>) -> Result<Reduction<R>> {
    transform_selected(tokens, m, (0..m.rows()).collect())
}

pub(crate) fn transform_selected<R: Real>(
    tokens: &Mat<R>,
    m: &Mat<R>,
    selected: Vec<usize>,
) -> Result<Reduction<R>> {
    if m.cols() != tokens.rows() {
        return Err(Error::Dimension(format!(
            "assignment is {}x{} but there are {} tokens",
            m.rows(),
            m.cols(),
            tokens.rows()
        )));
    }
    for j in 0..m.cols() {
        let sum: f64 = (0..m.rows()).map(|i| m.get(i, j).as_f64()).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "assignment column {j} sums to {sum}, expected 1 within 1e-6"
            )));
        }
    }
    let mut w = m.clone();
    let mut scale = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let row = w.row_mut(i);
        let mut s = R::zero();
        for &v in row.iter() {
            s += v;
        }
        if s <= R::zero() {
            return Err(Error::Contract(format!(
                "assignment row {i} sums to {:?}; every output token must receive mass",
                s
            )));
        }
        for v in row.iter_mut() {
            *v /= s;
        }
        scale.push(s);
    }
    let y = numkern::matmul(&w, tokens)?;
    Ok(Reduction {
        w,
        m: m.clone(),
        scale,
        selected,
        y,
    })
}

/// Diagonal-form reduction: keep exactly the rows in `keep` (strictly
/// increasing). `m = w`, every scale is 1, and `y` gathers rows bit-exactly.
pub fn prune_matrix<R: Real>(keep: &[usize], tokens: &Mat<R>) -> Result<Reduction<R>> {
    let n = tokens.rows();
    for pair in keep.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidArgument(format!(
                "keep list must be strictly increasing, got {:?} before {:?}",
                pair[0], pair[1]
            )));
        }
    }
    if let Some(&last) = keep.last() {
        if last >= n {
            return Err(Error::InvalidArgument(format!(
                "keep index {last} out of range for {n} tokens"
            )));
        }
    }
    let mut w = Mat::zeros(keep.len(), n);
    for (i, &j) in keep.iter().enumerate() {
        w.set(i, j, R::one());
    }
    let y = tokens.gather_rows(keep)?;
    Ok(Reduction {
        m: w.clone(),
        scale: vec![R::one(); keep.len()],
        selected: keep.to_vec(),
        w,
        y,
    })
}

/// Block-wise reduction: each group of token indices collapses to its mean.
/// `groups` must partition `0..tokens.rows()`. The raw assignment `m` is the
/// 0/1 group indicator, so the scale vector carries the exact group sizes.
pub fn merge_matrix<R: Real>(groups: &[Vec<usize>], tokens: &Mat<R>) -> Result<Reduction<R>> {
    let n = tokens.rows();
    let mut owner = vec![usize::MAX; n];
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::InvalidArgument(format!("group {g} is empty")));
        }
        for &j in group {
            if j >= n {
                return Err(Error::InvalidArgument(format!(
                    "token index {j} out of range for {n} tokens"
                )));
            }
            if owner[j] != usize::MAX {
                return Err(Error::InvalidArgument(format!(
                    "token {j} appears in groups {} and {g}",
                    owner[j]
                )));
            }
            owner[j] = g;
        }
    }
    if let Some(j) = owner.iter().position(|&g| g == usize::MAX) {
        return Err(Error::InvalidArgument(format!(
            "token {j} is not covered by any group"
        )));
    }
    let mut m = Mat::zeros(groups.len(), n);
    for (i, group) in groups.iter().enumerate() {
        for &j in group {
            m.set(i, j, R::one());
        }
    }
    let mut red = transform_selected(tokens, &m, Vec::new())?;
    red.selected = groups
        .iter()
        .map(|g| g.iter().copied().min().expect("groups are nonempty"))
        .collect();
    Ok(red)
}

fn identity_reduction<R: Real>(tokens: &Mat<R>) -> Reduction<R> {
    let n = tokens.rows();
    let eye = Mat::identity(n);
    Reduction {
        w: eye.clone(),
        m: eye,
        scale: vec![R::one(); n],
        selected: (0..n).collect(),
        y: tokens.clone(),
    }
}

/// Runs one reduction stage on `tokens` given the head-averaged attention map
/// from the same layer.
///
/// `bypass` names a token (the class token) that is excluded from selection,
/// similarity and assignment, and re-attached unchanged with scale 1. With a
/// bypass the scale budget conservation reads sum(s) = N including the
/// bypassed token's fixed 1.
pub fn reduce<R: Real>(
    tokens: &Mat<R>,
    attn: &Mat<R>,
    cfg: &ReducerConfig,
    bypass: Option<usize>,
) -> Result<Reduction<R>> {
    cfg.validate()?;
    let n = tokens.rows();
    if attn.rows() != n || attn.cols() != n {
        return Err(Error::Dimension(format!(
            "attention map {}x{} does not match {} tokens",
            attn.rows(),
            attn.cols(),
            n
        )));
    }
    if let Some(b) = bypass {
        if b >= n {
            return Err(Error::InvalidArgument(format!(
                "bypass index {b} out of range for {n} tokens"
            )));
        }
    }
    if cfg.mode == ReduceMode::None {
        return Ok(identity_reduction(tokens));
    }

    let h = informativeness(attn)?;
    let anchors = select_informative(&h, cfg.keep_ratio, bypass)?;
    if anchors.is_empty() {
        // Only the bypass token exists; nothing to reduce.
        return Ok(identity_reduction(tokens));
    }

    match cfg.mode {
        ReduceMode::Prune => {
            let keep = insert_sorted(&anchors, bypass);
            prune_matrix(&keep, tokens)
        }
        ReduceMode::Merge => {
            let assignment = nearest_anchor(tokens, &anchors, bypass)?;
            let keep = insert_sorted(&anchors, bypass);
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); keep.len()];
            let rank: std::collections::HashMap<usize, usize> =
                keep.iter().enumerate().map(|(r, &a)| (a, r)).collect();
            if let Some(b) = bypass {
                groups[rank[&b]].push(b); // the bypassed token is its own group
            }
            for (token, anchor) in assignment {
                groups[rank[&anchor]].push(token);
            }
            merge_matrix(&groups, tokens)
        }
        ReduceMode::Transform => {
            let eligible: Vec<usize> = (0..n).filter(|&i| Some(i) != bypass).collect();
            let sub = tokens.gather_rows(&eligible)?;
            // Anchor positions within the eligible list; both are ascending.
            let anchor_pos: Vec<usize> = {
                let mut pos = Vec::with_capacity(anchors.len());
                let mut cursor = 0;
                for &a in &anchors {
                    while eligible[cursor] != a {
                        cursor += 1;
                    }
                    pos.push(cursor);
                }
                pos
            };
            let gsim = gate_similarity(&sub, &anchor_pos, cfg.kappa)?;
            let m = assignment_matrix(&gsim, cfg.tau)?;
            let red = transform_selected(&sub, &m, anchor_pos)?;
            match bypass {
                Option::None => Ok(Reduction {
                    selected: anchors,
                    ..red
                }),
                Some(b) => Ok(stitch_bypass(red, &eligible, b, tokens)),
            }
        }
        ReduceMode::None => unreachable!(),
    }
}

// Maps every token (minus anchors and the bypass) to its most cosine-similar
// anchor, ties toward the lowest anchor index; anchors map to themselves.
// Returns (token, anchor) pairs covering every non-bypass token.
fn nearest_anchor<R: Real>(
    tokens: &Mat<R>,
    anchors: &[usize],
    bypass: Option<usize>,
) -> Result<Vec<(usize, usize)>> {
    let anchor_rows = tokens.gather_rows(anchors)?;
    let sim = numkern::cosine_sim(&anchor_rows, tokens)?;
    let is_anchor: std::collections::HashSet<usize> = anchors.iter().copied().collect();
    let mut out = Vec::with_capacity(tokens.rows());
    for j in 0..tokens.rows() {
        if Some(j) == bypass {
            continue;
        }
        if is_anchor.contains(&j) {
            out.push((j, j));
            continue;
        }
        let mut best = 0;
        for i in 1..anchors.len() {
            if sim.get(i, j) > sim.get(best, j) {
                best = i;
            }
        }
        out.push((j, anchors[best]));
    }
    Ok(out)
}

fn insert_sorted(sorted: &[usize], extra: Option<usize>) -> Vec<usize> {
    let mut out = sorted.to_vec();
    if let Some(b) = extra {
        let pos = out.partition_point(|&v| v < b);
        out.insert(pos, b);
    }
    out
}

// Lifts a reduction computed on the eligible tokens back to the full token
// space, inserting a one-hot row/column for the bypassed token with scale 1.
fn stitch_bypass<R: Real>(
    red: Reduction<R>,
    eligible: &[usize],
    bypass: usize,
    tokens: &Mat<R>,
) -> Reduction<R> {
    let n = tokens.rows();
    let d = tokens.cols();
    let selected_full: Vec<usize> = red.selected.iter().map(|&p| eligible[p]).collect();
    let row_of_bypass = selected_full.partition_point(|&v| v < bypass);
    let m_out = red.w.rows() + 1;

    let mut w = Mat::zeros(m_out, n);
    let mut m = Mat::zeros(m_out, n);
    let mut scale = vec![R::zero(); m_out];
    let mut y = Mat::zeros(m_out, d);
    let mut selected = selected_full;
    selected.insert(row_of_bypass, bypass);

    w.set(row_of_bypass, bypass, R::one());
    m.set(row_of_bypass, bypass, R::one());
    scale[row_of_bypass] = R::one();
    y.row_mut(row_of_bypass).copy_from_slice(tokens.row(bypass));

    for k in 0..red.w.rows() {
        let dst = if k < row_of_bypass { k } else { k + 1 };
        for (p, &full_col) in eligible.iter().enumerate() {
            w.set(dst, full_col, red.w.get(k, p));
            m.set(dst, full_col, red.m.get(k, p));
        }
        scale[dst] = red.scale[k];
        y.row_mut(dst).copy_from_slice(red.y.row(k));
    }

    Reduction {
        w,
        m,
        scale,
        selected,
        y,
    }
}
