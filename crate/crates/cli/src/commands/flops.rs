//! `flops`: analytic MAC cost, optionally asserted against a target.

use clap::Args;

use tokreduce::flops;

use crate::config::CommonArgs;
use crate::harness;
use crate::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct FlopsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// CI-style check, e.g. "3.0±5%", "3.0+-5%" or "3.0±0.2" (GFLOPs)
    #[arg(long)]
    pub assert: Option<String>,
}

// "target±tol" with tol either absolute GFLOPs or a percentage.
fn parse_assertion(text: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("bad --assert {text:?}, expected target±tol[%]"));
    let (target_text, tol_text) = text
        .split_once('±')
        .or_else(|| text.split_once("+-"))
        .ok_or_else(bad)?;
    let target: f64 = target_text.trim().parse().map_err(|_| bad())?;
    let tol_text = tol_text.trim();
    let tol = if let Some(percent) = tol_text.strip_suffix('%') {
        let p: f64 = percent.trim().parse().map_err(|_| bad())?;
        target.abs() * p / 100.0
    } else {
        tol_text.parse().map_err(|_| bad())?
    };
    if tol < 0.0 {
        return Err(bad());
    }
    Ok((target, tol))
}

pub fn exec(args: FlopsArgs) -> CmdResult {
    let resolved = args.common.resolve()?;
    let report = flops::model_cost(&resolved.model);

    let rendered = match resolved.format.as_deref() {
        Some("json") => {
            serde_json::to_string_pretty(&report)
                .map_err(|e| Failure::Other(anyhow::anyhow!("report encode: {e}")))?
                + "\n"
        }
        None | Some("table") => report.render_table(),
        Some(other) => {
            return Err(Failure::Usage(format!(
                "flops emits table or json, not {other:?}"
            )))
        }
    };
    harness::emit(resolved.out.as_deref(), &rendered)?;

    if let Some(assert_text) = &args.assert {
        let (target, tol) = parse_assertion(assert_text)?;
        let got = report.total_gflops;
        if (got - target).abs() <= tol {
            println!("assert PASS: {got:.4} GFLOPs within {target}±{tol:.4}");
        } else {
            return Err(Failure::Assertion(format!(
                "{got:.4} GFLOPs outside {target}±{tol:.4}"
            )));
        }
    }
    Ok(())
}
