//! Shared machinery: weights/inputs preparation and output plumbing.

use std::path::Path;

use tokreduce::numkern;
use tokreduce::reducer::ReduceMode;
use tokreduce::vit::{self, EncoderWeights, ModelConfig, WeightStore};
use tokreduce::Matrix;

use crate::config::{InputKind, Resolved, WeightsSource};
use crate::Failure;

pub fn load_store(resolved: &Resolved) -> Result<WeightStore, Failure> {
    match &resolved.weights {
        WeightsSource::Synthetic => Ok(WeightStore::synthetic(&resolved.model, resolved.seed)),
        WeightsSource::Path(path) => WeightStore::load(path)
            .map_err(|e| Failure::Usage(format!("weights {}: {e}", path.display()))),
    }
}

pub fn prepare(resolved: &Resolved) -> Result<(EncoderWeights<f64>, Vec<Matrix>), Failure> {
    let store = load_store(resolved)?;
    let weights = EncoderWeights::from_store(&store, &resolved.model)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut inputs = vit::synthetic_inputs(&resolved.model, &weights, resolved.seed, resolved.batch);
    if resolved.inputs == InputKind::Orthogonal {
        for x in &mut inputs {
            *x = numkern::orthonormalize_rows(x)?;
        }
    }
    Ok((weights, inputs))
}

/// Final features of the reduction-free forward, one per input.
pub fn baseline_features(
    weights: &EncoderWeights<f64>,
    model: &ModelConfig,
    inputs: &[Matrix],
) -> Result<Vec<Vec<f64>>, Failure> {
    let mut cfg = model.clone();
    cfg.reducer.mode = ReduceMode::None;
    inputs
        .iter()
        .map(|x| Ok(vit::forward(x, weights, &cfg)?.feature))
        .collect()
}

/// Mean relative L2 distance of this config's final feature from the
/// precomputed baseline features.
pub fn mean_feature_error(
    weights: &EncoderWeights<f64>,
    cfg: &ModelConfig,
    inputs: &[Matrix],
    baseline: &[Vec<f64>],
) -> Result<f64, Failure> {
    let mut total = 0.0;
    for (x, full) in inputs.iter().zip(baseline) {
        let out = vit::forward(x, weights, cfg)?;
        total += vit::relative_l2(&out.feature, full);
    }
    Ok(total / inputs.len() as f64)
}

/// Writes to the file when given, stdout otherwise.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
