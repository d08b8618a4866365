//! `compare`: prune vs merge vs transform on identical weights and inputs.

use clap::Args;
use serde::Serialize;

use tokreduce::flops;
use tokreduce::reducer::ReduceMode;

use crate::config::{parse_grid, CommonArgs};
use crate::harness;
use crate::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated keep ratios, e.g. 0.5,0.6,0.7
    #[arg(long, default_value = "0.7")]
    pub ratio_grid: String,
    /// Report kind (only class-token-error is defined)
    #[arg(long, default_value = "class-token-error")]
    pub report: String,
}

#[derive(Serialize)]
struct Row {
    mode: String,
    ratio: f64,
    class_token_error: f64,
    gflops: f64,
}

pub fn exec(args: CompareArgs) -> CmdResult {
    if args.report != "class-token-error" {
        return Err(Failure::Usage(format!(
            "unknown report kind {:?} (expected class-token-error)",
            args.report
        )));
    }
    let resolved = args.common.resolve()?;
    if !resolved.model.has_class_token {
        return Err(Failure::Usage(
            "compare reports class-token error and needs a class token".into(),
        ));
    }
    let ratios = parse_grid(&args.ratio_grid, "--ratio-grid")?;
    for &r in &ratios {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Failure::Usage(format!(
                "keep ratio must be in (0, 1], got {r}"
            )));
        }
    }

    let (weights, inputs) = harness::prepare(&resolved)?;
    let baseline = harness::baseline_features(&weights, &resolved.model, &inputs)?;

    let mut rows = Vec::new();
    // reduction-free baseline row: zero error at the full cost
    let mut none_cfg = resolved.model.clone();
    none_cfg.reducer.mode = ReduceMode::None;
    rows.push(Row {
        mode: "none".into(),
        ratio: 1.0,
        class_token_error: harness::mean_feature_error(&weights, &none_cfg, &inputs, &baseline)?,
        gflops: flops::model_cost(&none_cfg).total_gflops,
    });
    for mode in [ReduceMode::Prune, ReduceMode::Merge, ReduceMode::Transform] {
        for &ratio in &ratios {
            let mut cfg = resolved.model.clone();
            cfg.reducer.mode = mode;
            cfg.reducer.keep_ratio = ratio;
            rows.push(Row {
                mode: mode.to_string(),
                ratio,
                class_token_error: harness::mean_feature_error(
                    &weights, &cfg, &inputs, &baseline,
                )?,
                gflops: flops::model_cost(&cfg).total_gflops,
            });
        }
    }

    let rendered = match resolved.format.as_deref() {
        Some("json") => {
            serde_json::to_string_pretty(&rows)
                .map_err(|e| Failure::Other(anyhow::anyhow!("report encode: {e}")))?
                + "\n"
        }
        None | Some("csv") => {
            let mut out = String::from("mode,ratio,class_token_error,gflops\n");
            for row in &rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row.mode, row.ratio, row.class_token_error, row.gflops
                ));
            }
            out
        }
        Some(other) => {
            return Err(Failure::Usage(format!(
                "compare emits csv or json, not {other:?}"
            )))
        }
    };
    harness::emit(resolved.out.as_deref(), &rendered)
}
