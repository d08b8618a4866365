//! Full-forward equivalence against brute-force reference paths.

use tokreduce::reducer::{ReduceMode, ReducerConfig};
use tokreduce::vit::{self, EncoderWeights, ModelConfig, WeightStore};
use tokreduce::{flops, numkern};
use tokreduce_testkit as testkit;

fn small_cfg(mode: ReduceMode) -> ModelConfig {
    ModelConfig {
        layers: 5,
        dim: 32,
        heads: 4,
        mlp_ratio: 2.0,
        tokens: 17,
        has_class_token: true,
        num_classes: 7,
        reduce_at: vec![1, 3],
        reducer: ReducerConfig {
            keep_ratio: 0.6,
            mode,
            ..ReducerConfig::default()
        },
    }
}

fn setup(cfg: &ModelConfig, seed: u64) -> (EncoderWeights<f64>, Vec<tokreduce::Matrix>) {
    let store = WeightStore::synthetic(cfg, seed);
    let weights = EncoderWeights::from_store(&store, cfg).unwrap();
    let inputs = vit::synthetic_inputs(cfg, &weights, seed, 1);
    (weights, inputs)
}

#[test]
fn prune_forward_equals_row_deletion_forward() {
    for seed in [1u64, 2, 3, 4] {
        let cfg = small_cfg(ReduceMode::Prune);
        let (weights, inputs) = setup(&cfg, seed);
        let out = vit::forward(&inputs[0], &weights, &cfg).unwrap();
        let enc = testkit::raw_encoder(&weights);
        let (ref_logits, ref_feature, ref_counts) = testkit::reference_forward(
            &enc,
            &cfg,
            testkit::ReferencePath::PruneDelete,
            &testkit::to_rows(&inputs[0]),
        );
        assert_eq!(out.trace.stage_token_counts, ref_counts, "seed {seed}");
        assert!(
            testkit::max_abs_diff_vec(&out.logits, &ref_logits) < 1e-9,
            "seed {seed}"
        );
        assert!(testkit::max_abs_diff_vec(&out.feature, &ref_feature) < 1e-9);
    }
}

#[test]
fn merge_forward_equals_group_mean_forward() {
    for seed in [5u64, 6, 7, 8] {
        let cfg = small_cfg(ReduceMode::Merge);
        let (weights, inputs) = setup(&cfg, seed);
        let out = vit::forward(&inputs[0], &weights, &cfg).unwrap();
        let enc = testkit::raw_encoder(&weights);
        let (ref_logits, ref_feature, ref_counts) = testkit::reference_forward(
            &enc,
            &cfg,
            testkit::ReferencePath::MergeMeans,
            &testkit::to_rows(&inputs[0]),
        );
        assert_eq!(out.trace.stage_token_counts, ref_counts, "seed {seed}");
        assert!(
            testkit::max_abs_diff_vec(&out.logits, &ref_logits) < 1e-9,
            "seed {seed}"
        );
        assert!(testkit::max_abs_diff_vec(&out.feature, &ref_feature) < 1e-9);
    }
}

#[test]
fn plain_reference_matches_mode_none() {
    let mut cfg = small_cfg(ReduceMode::None);
    cfg.reduce_at = vec![];
    let (weights, inputs) = setup(&cfg, 17);
    let out = vit::forward(&inputs[0], &weights, &cfg).unwrap();
    let enc = testkit::raw_encoder(&weights);
    let (ref_logits, _, _) = testkit::reference_forward(
        &enc,
        &cfg,
        testkit::ReferencePath::Plain,
        &testkit::to_rows(&inputs[0]),
    );
    assert!(testkit::max_abs_diff_vec(&out.logits, &ref_logits) < 1e-9);
}

#[test]
fn analytic_token_trajectory_matches_forward_trace() {
    for mode in [ReduceMode::Transform, ReduceMode::Prune, ReduceMode::Merge] {
        let cfg = small_cfg(mode);
        let (weights, inputs) = setup(&cfg, 23);
        let out = vit::forward(&inputs[0], &weights, &cfg).unwrap();
        let report = flops::model_cost(&cfg);
        assert_eq!(
            report.stage_token_counts, out.trace.stage_token_counts,
            "mode {mode}"
        );
        for (layer_cost, layer_rec) in report.per_layer.iter().zip(&out.trace.layers) {
            assert_eq!(layer_cost.tokens_in, layer_rec.tokens_in);
            assert_eq!(layer_cost.tokens_out, layer_rec.tokens_out);
        }
    }
}

#[test]
fn transform_at_ratio_one_keeps_orthonormal_tokens_close() {
    // The reducer-level identity limit: with M = N, orthonormal tokens,
    // kappa 0.5 and tau 150, the off-anchor assignment mass is ~exp(-75),
    // so Y stays within 1e-4 of X.
    let mut rng = testkit::rng(31);
    for _ in 0..20 {
        let x = testkit::to_matrix(&testkit::orthonormal_rows(&mut rng, 8, 16));
        let a = testkit::to_matrix(&testkit::random_row_stochastic(&mut rng, 8));
        let cfg = ReducerConfig {
            keep_ratio: 1.0,
            kappa: 0.5,
            tau: 150.0,
            mode: ReduceMode::Transform,
            class_token_bypass: false,
        };
        let red = tokreduce::reducer::reduce(&x, &a, &cfg, None).unwrap();
        assert!(
            testkit::max_abs_diff(&testkit::to_rows(&red.y), &testkit::to_rows(&x)) < 1e-4
        );
    }
}

#[test]
fn scaled_attention_equivalence_is_tight_across_shapes() {
    // Constant scale vectors of several magnitudes against the all-ones
    // baseline, multiple shapes and seeds, 1e-12 tolerance.
    for (seed, tokens, dim, heads) in [(1u64, 5, 8, 2), (2, 9, 12, 3), (3, 16, 16, 4)] {
        let cfg = ModelConfig {
            layers: 1,
            dim,
            heads,
            mlp_ratio: 2.0,
            tokens,
            has_class_token: false,
            num_classes: 3,
            reduce_at: vec![],
            reducer: ReducerConfig::default(),
        };
        let (weights, inputs) = setup(&cfg, seed);
        let ones = vec![1.0; tokens];
        let (base, _) =
            vit::scaled_attention(&inputs[0], &ones, &weights.blocks[0], heads).unwrap();
        for c in [0.1, 3.0, 42.0] {
            let s = vec![c; tokens];
            let (out, _) =
                vit::scaled_attention(&inputs[0], &s, &weights.blocks[0], heads).unwrap();
            for (x, y) in base.data().iter().zip(out.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn recovery_composes_across_real_reduction_stages() {
    // Two transform stages; recovery applied in reverse stage order equals
    // recovery with the composed index, and all rows come from the source.
    let mut rng = testkit::rng(77);
    let x0 = testkit::to_matrix(&testkit::random_rows(&mut rng, 12, 6, 1.0));
    let cfg = ReducerConfig {
        keep_ratio: 0.7,
        class_token_bypass: false,
        ..ReducerConfig::default()
    };
    let a0 = testkit::to_matrix(&testkit::random_row_stochastic(&mut rng, 12));
    let red1 = tokreduce::reducer::reduce(&x0, &a0, &cfg, None).unwrap();
    let a1 = testkit::to_matrix(&testkit::random_row_stochastic(&mut rng, red1.y.rows()));
    let red2 = tokreduce::reducer::reduce(&red1.y, &a1, &cfg, None).unwrap();

    let i1 = tokreduce::recovery::build_index(&x0, &red1.y).unwrap();
    let i2 = tokreduce::recovery::build_index(&red1.y, &red2.y).unwrap();
    let fused = tokreduce::recovery::RecoveryIndex::compose(&i1, &i2).unwrap();

    let two_step = tokreduce::recovery::recover(
        &tokreduce::recovery::recover(&red2.y, &i2).unwrap(),
        &i1,
    )
    .unwrap();
    let one_step = tokreduce::recovery::recover(&red2.y, &fused).unwrap();
    assert_eq!(two_step.data(), one_step.data());
    assert_eq!(two_step.rows(), 12);
}

#[test]
fn f32_forward_stays_close_to_f64() {
    let cfg = small_cfg(ReduceMode::Transform);
    let store = WeightStore::synthetic(&cfg, 41);
    let w64 = EncoderWeights::<f64>::from_store(&store, &cfg).unwrap();
    let w32 = EncoderWeights::<f32>::from_store(&store, &cfg).unwrap();
    let in64 = vit::synthetic_inputs(&cfg, &w64, 41, 1);
    let in32: tokreduce::Mat<f32> = {
        let data: Vec<f32> = in64[0].data().iter().map(|&v| v as f32).collect();
        tokreduce::Mat::from_vec(in64[0].rows(), in64[0].cols(), data).unwrap()
    };
    let out64 = vit::forward(&in64[0], &w64, &cfg).unwrap();
    let out32 = vit::forward(&in32, &w32, &cfg).unwrap();
    assert_eq!(
        out64.trace.stage_token_counts,
        out32.trace.stage_token_counts
    );
    for (a, b) in out64.logits.iter().zip(&out32.logits) {
        assert!((a - *b as f64).abs() < 1e-2, "{a} vs {b}");
    }
    let _ = numkern::matmul::<f32>(
        &tokreduce::Mat::identity(2),
        &tokreduce::Mat::identity(2),
    )
    .unwrap();
}
