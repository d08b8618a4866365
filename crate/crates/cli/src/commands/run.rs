//! `run`: forward the batch, write the trace report.

use std::time::Instant;

use clap::Args;
use serde::Serialize;

use tokreduce::vit::{self, LayerRecord};

use crate::config::{CommonArgs, Resolved};
use crate::harness;
use crate::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directory for per-stage W and s coefficient CSVs (heatmap fodder)
    #[arg(long)]
    pub dump_coeff: Option<std::path::PathBuf>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a Resolved,
    stage_token_counts: Vec<usize>,
    layers: Vec<LayerRecord>,
    /// One logits vector per batch element.
    logits: Vec<Vec<f64>>,
}

pub fn exec(args: RunArgs) -> CmdResult {
    let resolved = args.common.resolve()?;
    if let Some(fmt) = resolved.format.as_deref() {
        if fmt != "json" {
            return Err(Failure::Usage(format!(
                "run emits json, not {fmt:?}"
            )));
        }
    }
    let (weights, inputs) = harness::prepare(&resolved)?;

    let started = Instant::now();
    let mut logits = Vec::with_capacity(inputs.len());
    let mut first_trace = None;
    for x in &inputs {
        let out = vit::forward(x, &weights, &resolved.model)?;
        logits.push(out.logits);
        if first_trace.is_none() {
            first_trace = Some(out.trace);
        }
    }
    let elapsed = started.elapsed();
    let trace = first_trace.expect("batch is nonempty");
    // timing goes to stderr so the report file stays bit-reproducible
    eprintln!(
        "run: {} inputs in {:.3}s ({:.2} inputs/s)",
        inputs.len(),
        elapsed.as_secs_f64(),
        inputs.len() as f64 / elapsed.as_secs_f64()
    );

    if let Some(dir) = &args.dump_coeff {
        std::fs::create_dir_all(dir)?;
        for stage in &trace.reductions {
            let w_path = dir.join(format!("w_layer{}.csv", stage.layer));
            let s_path = dir.join(format!("s_layer{}.csv", stage.layer));
            stage
                .reduction
                .write_w_csv(std::fs::File::create(w_path)?)?;
            stage
                .reduction
                .write_scale_csv(std::fs::File::create(s_path)?)?;
        }
    }

    let report = RunReport {
        config: &resolved,
        stage_token_counts: trace.stage_token_counts.clone(),
        layers: trace.layers.clone(),
        logits,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Other(anyhow::anyhow!("report encode: {e}")))?;
    harness::emit(resolved.out.as_deref(), &(json + "\n"))
}
