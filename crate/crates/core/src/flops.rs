//! Analytic cost model for the encoder with and without token reduction.
//!
//! The unit is the MAC (one multiply-accumulate = one "FLOP"); this is the
//! convention under which an unreduced DeiT-S at 197 tokens costs 4.6 G.
//! Per block, at N tokens of width d:
//!
//! - attention: `4 N d^2` for the QKV and output projections plus
//!   `2 N^2 d` for `Q K^T` and `A V`;
//! - feed-forward: `2 * mlp_ratio * N d^2`.
//!
//! Biases, norms, softmax and activations are excluded. The model adds the
//! patch embedding (`N_patch * d * 768` for 16x16 RGB patches), the
//! classifier head, and the reduction overhead (similarity `M N d` plus
//! transform `M N d` per stage), which stays around a percent of the total.
//!
//! Within a reduction block, attention runs at the pre-reduction count and
//! the FFN at the post-reduction count, matching where the stage sits.

use serde::Serialize;

use crate::reducer::ReduceMode;
use crate::vit::ModelConfig;

/// Input width of the patch embedding: 16x16 patches, 3 channels.
pub const PATCH_INPUT_DIM: usize = 16 * 16 * 3;

/// MACs of one transformer block at a fixed token count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockCost {
    pub attn: f64,
    pub ffn: f64,
}

pub fn block_cost(tokens: usize, dim: usize, mlp_ratio: f64) -> BlockCost {
    let n = tokens as f64;
    let d = dim as f64;
    BlockCost {
        attn: 4.0 * n * d * d + 2.0 * n * n * d,
        ffn: 2.0 * mlp_ratio * n * d * d,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerCost {
    pub layer: usize,
    pub tokens_in: usize,
    pub tokens_out: usize,
    pub attn_macs: f64,
    pub ffn_macs: f64,
}

/// Full-model cost breakdown. `total_gflops` counts giga-MACs.
#[derive(Clone, Debug, Serialize)]
pub struct CostReport {
    pub total_gflops: f64,
    pub total_macs: f64,
    pub per_layer: Vec<LayerCost>,
    pub patch_embed_macs: f64,
    pub head_macs: f64,
    pub reduction_overhead_macs: f64,
    /// Token count at input and after each reduction stage.
    pub stage_token_counts: Vec<usize>,
}

impl CostReport {
    /// Human-readable table, one row per layer.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str("layer  tokens_in  tokens_out  attn_mmacs  ffn_mmacs\n");
        for l in &self.per_layer {
            out.push_str(&format!(
                "{:>5}  {:>9}  {:>10}  {:>10.1}  {:>9.1}\n",
                l.layer,
                l.tokens_in,
                l.tokens_out,
                l.attn_macs / 1e6,
                l.ffn_macs / 1e6
            ));
        }
        out.push_str(&format!(
            "patch embed: {:.1} MMACs, head: {:.1} MMACs, reduction overhead: {:.1} MMACs ({:.2}% of total)\n",
            self.patch_embed_macs / 1e6,
            self.head_macs / 1e6,
            self.reduction_overhead_macs / 1e6,
            100.0 * self.reduction_overhead_macs / self.total_macs
        ));
        out.push_str(&format!(
            "total: {:.4} GFLOPs (MACs), token trajectory {:?}\n",
            self.total_gflops, self.stage_token_counts
        ));
        out
    }
}

// Mirrors reducer::keep_count.
fn keep_count(ratio: f64, eligible: usize) -> usize {
    if eligible == 0 {
        return 0;
    }
    ((ratio * eligible as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Analytic cost of a configured model, walking the same token-count
/// trajectory the forward pass produces.
pub fn model_cost(cfg: &ModelConfig) -> CostReport {
    let cls = usize::from(cfg.has_class_token);
    let mut patch = cfg.patch_tokens();
    let mut per_layer = Vec::with_capacity(cfg.layers);
    let mut overhead = 0.0;
    let mut stage_counts = vec![patch + cls];
    let reducing = cfg.reducer.mode != ReduceMode::None;

    for layer in 0..cfg.layers {
        let tokens_in = patch + cls;
        let attn = block_cost(tokens_in, cfg.dim, cfg.mlp_ratio).attn;
        if reducing && cfg.reduce_at.contains(&layer) {
            let kept = keep_count(cfg.reducer.keep_ratio, patch);
            if kept < patch {
                // similarity M*N*d + transform M*N*d
                overhead += 2.0 * (kept as f64) * (patch as f64) * cfg.dim as f64;
                patch = kept;
                stage_counts.push(patch + cls);
            }
        }
        let tokens_out = patch + cls;
        let ffn = block_cost(tokens_out, cfg.dim, cfg.mlp_ratio).ffn;
        per_layer.push(LayerCost {
            layer,
            tokens_in,
            tokens_out,
            attn_macs: attn,
            ffn_macs: ffn,
        });
    }

    let patch_embed = (cfg.patch_tokens() * cfg.dim * PATCH_INPUT_DIM) as f64;
    let head = (cfg.num_classes * cfg.dim) as f64;
    let blocks: f64 = per_layer.iter().map(|l| l.attn_macs + l.ffn_macs).sum();
    let total = blocks + patch_embed + head + overhead;
    CostReport {
        total_gflops: total / 1e9,
        total_macs: total,
        per_layer,
        patch_embed_macs: patch_embed,
        head_macs: head,
        reduction_overhead_macs: overhead,
        stage_token_counts: stage_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reducer::ReducerConfig;
    use approx::assert_relative_eq;

    fn deit_s(ratio: f64, mode: ReduceMode) -> ModelConfig {
        let mut cfg = ModelConfig::deit_small();
        cfg.reducer = ReducerConfig {
            keep_ratio: ratio,
            mode,
            ..ReducerConfig::default()
        };
        cfg
    }

    #[test]
    fn block_cost_hand_evaluation() {
        // N=197, d=384, mlp 4: 4*197*384^2 + 2*197^2*384 = 146_000_640,
        // ffn = 8*197*384^2 = 232_390_656; together about 378.4 MMACs.
        let c = block_cost(197, 384, 4.0);
        assert_relative_eq!(c.attn, 146_000_640.0);
        assert_relative_eq!(c.ffn, 232_390_656.0);
        assert_relative_eq!(c.attn + c.ffn, 378.4e6, max_relative = 1e-4);
    }

    #[test]
    fn quadratic_term_quadruples_with_tokens() {
        let c1 = block_cost(100, 64, 4.0);
        let c2 = block_cost(200, 64, 4.0);
        let quad1 = c1.attn - 4.0 * 100.0 * 64.0 * 64.0;
        let quad2 = c2.attn - 4.0 * 200.0 * 64.0 * 64.0;
        assert_relative_eq!(quad2, 4.0 * quad1);
    }

    #[test]
    fn degenerate_unit_shapes() {
        let c = block_cost(1, 1, 4.0);
        assert_relative_eq!(c.attn, 6.0);
        assert_relative_eq!(c.ffn, 8.0);
    }

    #[test]
    fn deit_s_unreduced_is_4_6_gflops() {
        let report = model_cost(&deit_s(1.0, ReduceMode::None));
        assert_relative_eq!(report.total_gflops, 4.6, max_relative = 0.02);
        assert_eq!(report.reduction_overhead_macs, 0.0);
    }

    #[test]
    fn deit_s_ratio_07_is_3_0_gflops() {
        let report = model_cost(&deit_s(0.7, ReduceMode::Transform));
        assert_relative_eq!(report.total_gflops, 3.0, max_relative = 0.05);
        assert_eq!(report.stage_token_counts, vec![197, 139, 98, 69]);
    }

    #[test]
    fn deit_s_ratio_06_is_2_6_gflops() {
        let report = model_cost(&deit_s(0.6, ReduceMode::Transform));
        assert_relative_eq!(report.total_gflops, 2.6, max_relative = 0.07);
    }

    #[test]
    fn ratio_one_equals_unreduced_exactly() {
        let with_stages = model_cost(&deit_s(1.0, ReduceMode::Transform));
        let mut cfg = deit_s(1.0, ReduceMode::None);
        cfg.reduce_at = vec![];
        let plain = model_cost(&cfg);
        assert_eq!(with_stages.total_macs, plain.total_macs);
    }

    #[test]
    fn total_is_sum_of_parts() {
        let report = model_cost(&deit_s(0.7, ReduceMode::Transform));
        let blocks: f64 = report
            .per_layer
            .iter()
            .map(|l| l.attn_macs + l.ffn_macs)
            .sum();
        let sum = blocks + report.patch_embed_macs + report.head_macs
            + report.reduction_overhead_macs;
        assert_relative_eq!(report.total_macs, sum);
        assert!(report.per_layer.iter().all(|l| l.attn_macs >= 0.0 && l.ffn_macs >= 0.0));
    }

    #[test]
    fn decreasing_ratio_never_costs_more_on_practical_grid() {
        // Strict all-ratio monotonicity is broken by the overhead term within
        // a token of ratio 1 (granularity effect); a 0.05-spaced grid is the
        // practical regime and is monotone.
        let mut prev = f64::INFINITY;
        for step in (1..=20).rev() {
            let ratio = step as f64 * 0.05;
            let total = model_cost(&deit_s(ratio, ReduceMode::Transform)).total_macs;
            assert!(
                total <= prev + 1e-6,
                "cost rose when ratio dropped to {ratio}: {total} > {prev}"
            );
            prev = total;
        }
    }

    #[test]
    fn overhead_is_small_fraction() {
        let report = model_cost(&deit_s(0.7, ReduceMode::Transform));
        assert!(report.reduction_overhead_macs / report.total_macs < 0.02);
    }
}
