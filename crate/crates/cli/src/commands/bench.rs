//! `bench`: wall-clock throughput of the unreduced vs transform forward.
//!
//! Timings are the one intentionally nondeterministic output of the CLI.

use std::time::Instant;

use clap::Args;
use serde::Serialize;

use tokreduce::flops;
use tokreduce::reducer::ReduceMode;
use tokreduce::vit::{self, EncoderWeights, ModelConfig, WeightStore};
use tokreduce::Real;

use crate::config::CommonArgs;
use crate::harness;
use crate::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Timed trials per mode (median is reported)
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Untimed warmup passes per mode
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Working precision: f64 | f32
    #[arg(long, default_value = "f64")]
    pub precision: String,
}

#[derive(Serialize)]
struct BenchRow {
    mode: String,
    tokens_final: usize,
    median_ips: f64,
    trials: usize,
    macs_per_input: f64,
}

#[derive(Serialize)]
struct BenchReport {
    precision: String,
    batch: usize,
    results: Vec<BenchRow>,
    /// transform throughput over unreduced throughput
    speedup: f64,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn bench_mode<R: Real>(
    store: &WeightStore,
    model: &ModelConfig,
    mode: ReduceMode,
    seed: u64,
    batch: usize,
    warmup: usize,
    trials: usize,
) -> Result<BenchRow, Failure> {
    let mut cfg = model.clone();
    cfg.reducer.mode = mode;
    let weights = EncoderWeights::<R>::from_store(store, &cfg)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let inputs = vit::synthetic_inputs::<R>(&cfg, &weights, seed, batch);

    let mut tokens_final = cfg.tokens;
    for _ in 0..warmup {
        for x in &inputs {
            let out = vit::forward(x, &weights, &cfg)?;
            tokens_final = *out.trace.stage_token_counts.last().expect("nonempty");
        }
    }
    let mut ips = Vec::with_capacity(trials);
    for _ in 0..trials {
        let t0 = Instant::now();
        for x in &inputs {
            let out = vit::forward(x, &weights, &cfg)?;
            std::hint::black_box(&out.logits);
        }
        ips.push(batch as f64 / t0.elapsed().as_secs_f64());
    }
    Ok(BenchRow {
        mode: mode.to_string(),
        tokens_final,
        median_ips: median(ips),
        trials,
        macs_per_input: flops::model_cost(&cfg).total_macs,
    })
}

pub fn exec(args: BenchArgs) -> CmdResult {
    let resolved = args.common.resolve()?;
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    if !matches!(args.precision.as_str(), "f64" | "f32") {
        return Err(Failure::Usage(format!(
            "precision must be f64 or f32, got {:?}",
            args.precision
        )));
    }
    let store = harness::load_store(&resolved)?;

    let run = |mode| -> Result<BenchRow, Failure> {
        if args.precision == "f32" {
            bench_mode::<f32>(
                &store,
                &resolved.model,
                mode,
                resolved.seed,
                resolved.batch,
                args.warmup,
                args.trials,
            )
        } else {
            bench_mode::<f64>(
                &store,
                &resolved.model,
                mode,
                resolved.seed,
                resolved.batch,
                args.warmup,
                args.trials,
            )
        }
    };
    let unreduced = run(ReduceMode::None)?;
    let transformed = run(ReduceMode::Transform)?;
    let speedup = transformed.median_ips / unreduced.median_ips;

    let report = BenchReport {
        precision: args.precision.clone(),
        batch: resolved.batch,
        results: vec![unreduced, transformed],
        speedup,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Other(anyhow::anyhow!("report encode: {e}")))?;
    harness::emit(resolved.out.as_deref(), &(json + "\n"))
}
