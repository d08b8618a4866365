//! `sweep`: class-token error over a kappa x tau grid, cells in parallel.

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use tokreduce::reducer::ReduceMode;

use crate::config::{parse_grid, CommonArgs};
use crate::harness;
use crate::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated gate thresholds
    #[arg(long, default_value = "0.3,0.4,0.5,0.6,0.7,0.8")]
    pub kappa_grid: String,
    /// Comma-separated softmax temperatures
    #[arg(long, default_value = "1,20,100,150,200,250")]
    pub tau_grid: String,
}

#[derive(Serialize)]
struct Cell {
    kappa: f64,
    tau: f64,
    class_token_error: f64,
}

pub fn exec(args: SweepArgs) -> CmdResult {
    let resolved = args.common.resolve()?;
    if resolved.model.reducer.mode != ReduceMode::Transform {
        return Err(Failure::Usage(
            "sweep varies kappa/tau, which only drive mode=transform".into(),
        ));
    }
    if !resolved.model.has_class_token {
        return Err(Failure::Usage(
            "sweep reports class-token error and needs a class token".into(),
        ));
    }
    let kappas = parse_grid(&args.kappa_grid, "--kappa-grid")?;
    let taus = parse_grid(&args.tau_grid, "--tau-grid")?;
    for &k in &kappas {
        if !(-1.0..=1.0).contains(&k) {
            return Err(Failure::Usage(format!(
                "kappa must be in [-1, 1], got {k}"
            )));
        }
    }
    for &t in &taus {
        if t.is_nan() || t <= 0.0 {
            return Err(Failure::Usage(format!("tau must be > 0, got {t}")));
        }
    }

    let (weights, inputs) = harness::prepare(&resolved)?;
    let baseline = harness::baseline_features(&weights, &resolved.model, &inputs)?;

    let grid: Vec<(f64, f64)> = kappas
        .iter()
        .flat_map(|&k| taus.iter().map(move |&t| (k, t)))
        .collect();
    // cells are independent; results are sorted afterwards so the emission
    // order never depends on scheduling
    let mut cells: Vec<Cell> = grid
        .par_iter()
        .map(|&(kappa, tau)| {
            let mut cfg = resolved.model.clone();
            cfg.reducer.kappa = kappa;
            cfg.reducer.tau = tau;
            let class_token_error =
                harness::mean_feature_error(&weights, &cfg, &inputs, &baseline)
                    .map_err(|f| match f {
                        Failure::Other(e) => e,
                        Failure::Usage(m) | Failure::Assertion(m) => anyhow::anyhow!(m),
                    })?;
            Ok(Cell {
                kappa,
                tau,
                class_token_error,
            })
        })
        .collect::<Result<Vec<_>, anyhow::Error>>()?;
    cells.sort_by(|a, b| {
        a.kappa
            .total_cmp(&b.kappa)
            .then(a.tau.total_cmp(&b.tau))
    });

    let rendered = match resolved.format.as_deref() {
        Some("json") => {
            serde_json::to_string_pretty(&cells)
                .map_err(|e| Failure::Other(anyhow::anyhow!("report encode: {e}")))?
                + "\n"
        }
        None | Some("csv") => {
            let mut out = String::from("kappa,tau,class_token_error\n");
            for c in &cells {
                out.push_str(&format!("{},{},{}\n", c.kappa, c.tau, c.class_token_error));
            }
            out
        }
        Some(other) => {
            return Err(Failure::Usage(format!(
                "sweep emits csv or json, not {other:?}"
            )))
        }
    };
    harness::emit(resolved.out.as_deref(), &rendered)
}
