//! Flag and config-file resolution.
//!
//! Precedence per field: built-in default < config file (`--config`, flat
//! key-value JSON) < command-line flag. The resolved model config is echoed
//! into every report so an output file pins its own provenance.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use tokreduce::reducer::ReduceMode;
use tokreduce::vit::ModelConfig;

use crate::Failure;

#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// Model preset: deit-ti | deit-s | deit-b | custom
    #[arg(long)]
    pub preset: Option<String>,
    /// Encoder depth (custom preset)
    #[arg(long)]
    pub depth: Option<usize>,
    /// Embedding width (custom preset)
    #[arg(long)]
    pub dim: Option<usize>,
    /// Attention heads (custom preset)
    #[arg(long)]
    pub heads: Option<usize>,
    /// Sequence length including the class token (custom preset)
    #[arg(long)]
    pub tokens: Option<usize>,
    /// FFN expansion ratio
    #[arg(long)]
    pub mlp_ratio: Option<f64>,
    /// Drop the class token and mean-pool for the head
    #[arg(long)]
    pub no_class_token: bool,
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Keep ratio r per reduction stage, in (0, 1]
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Similarity gate threshold, in [-1, 1]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Assignment softmax temperature, > 0
    #[arg(long)]
    pub tau: Option<f64>,
    /// transform | prune | merge | none
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated reduction layers, e.g. 3,6,9 (empty for none)
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inputs per run
    #[arg(long)]
    pub batch: Option<usize>,
    /// "synthetic" or a path to a weight manifest JSON
    #[arg(long)]
    pub weights: Option<String>,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv | json (table for flops)
    #[arg(long)]
    pub format: Option<String>,
    /// gaussian | orthogonal input tokens
    #[arg(long)]
    pub inputs: Option<String>,
    /// Flat key-value JSON config; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// The on-disk config file mirrors the flags, flat key-value JSON.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub depth: Option<usize>,
    pub dim: Option<usize>,
    pub heads: Option<usize>,
    pub tokens: Option<usize>,
    pub mlp_ratio: Option<f64>,
    pub class_token: Option<bool>,
    pub num_classes: Option<usize>,
    pub ratio: Option<f64>,
    pub kappa: Option<f64>,
    pub tau: Option<f64>,
    pub mode: Option<String>,
    pub reduce_at: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub batch: Option<usize>,
    pub weights: Option<String>,
    pub format: Option<String>,
    pub inputs: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightsSource {
    Synthetic,
    Path(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Gaussian,
    Orthogonal,
}

/// Everything a command needs, after merging defaults, file and flags.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub preset: String,
    pub model: ModelConfig,
    pub seed: u64,
    pub batch: usize,
    pub weights: WeightsSource,
    pub inputs: InputKind,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Option<String>,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_layer_list(text: &str) -> Result<Vec<usize>, Failure> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("bad layer index {part:?} in --layers")))
        })
        .collect()
}

pub fn parse_grid(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    let values: Result<Vec<f64>, Failure> = text
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("bad value {part:?} in {flag}")))
        })
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err(usage(format!("{flag} must list at least one value")));
    }
    Ok(values)
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<Resolved, Failure> {
        let file: FileConfig = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| usage(format!("bad config {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        let preset = self
            .preset
            .clone()
            .or(file.preset.clone())
            .unwrap_or_else(|| "deit-s".into());
        let mut model = match preset.as_str() {
            "deit-ti" => ModelConfig::deit_tiny(),
            "deit-s" => ModelConfig::deit_small(),
            "deit-b" => ModelConfig::deit_base(),
            "custom" => {
                let depth = self
                    .depth
                    .or(file.depth)
                    .ok_or_else(|| usage("custom preset needs --depth"))?;
                let dim = self
                    .dim
                    .or(file.dim)
                    .ok_or_else(|| usage("custom preset needs --dim"))?;
                let heads = self
                    .heads
                    .or(file.heads)
                    .ok_or_else(|| usage("custom preset needs --heads"))?;
                let tokens = self
                    .tokens
                    .or(file.tokens)
                    .ok_or_else(|| usage("custom preset needs --tokens"))?;
                ModelConfig {
                    layers: depth,
                    dim,
                    heads,
                    mlp_ratio: 4.0,
                    tokens,
                    has_class_token: true,
                    num_classes: 1000,
                    reduce_at: ModelConfig::default_reduce_at(depth),
                    reducer: Default::default(),
                }
            }
            other => {
                return Err(usage(format!(
                    "unknown preset {other:?} (expected deit-ti|deit-s|deit-b|custom)"
                )))
            }
        };

        // shape overrides apply on top of any preset
        if preset != "custom" {
            if let Some(depth) = self.depth.or(file.depth) {
                model.layers = depth;
                model.reduce_at = ModelConfig::default_reduce_at(depth);
            }
            if let Some(dim) = self.dim.or(file.dim) {
                model.dim = dim;
            }
            if let Some(heads) = self.heads.or(file.heads) {
                model.heads = heads;
            }
            if let Some(tokens) = self.tokens.or(file.tokens) {
                model.tokens = tokens;
            }
        }
        if let Some(mlp_ratio) = self.mlp_ratio.or(file.mlp_ratio) {
            model.mlp_ratio = mlp_ratio;
        }
        if self.no_class_token {
            model.has_class_token = false;
        } else if let Some(ct) = file.class_token {
            model.has_class_token = ct;
        }
        if let Some(classes) = self.num_classes.or(file.num_classes) {
            model.num_classes = classes;
        }

        if let Some(ratio) = self.ratio.or(file.ratio) {
            model.reducer.keep_ratio = ratio;
        }
        if let Some(kappa) = self.kappa.or(file.kappa) {
            model.reducer.kappa = kappa;
        }
        if let Some(tau) = self.tau.or(file.tau) {
            model.reducer.tau = tau;
        }
        let mode_text = self.mode.clone().or(file.mode.clone());
        if let Some(mode_text) = mode_text {
            model.reducer.mode = mode_text
                .parse::<ReduceMode>()
                .map_err(|e| usage(e.to_string()))?;
        }
        if let Some(layers_text) = &self.layers {
            model.reduce_at = parse_layer_list(layers_text)?;
        } else if let Some(reduce_at) = file.reduce_at {
            model.reduce_at = reduce_at;
        }

        model.validate().map_err(|e| usage(e.to_string()))?;

        let weights_text = self
            .weights
            .clone()
            .or(file.weights)
            .unwrap_or_else(|| "synthetic".into());
        let weights = if weights_text == "synthetic" {
            WeightsSource::Synthetic
        } else {
            WeightsSource::Path(PathBuf::from(weights_text))
        };

        let inputs = match self
            .inputs
            .clone()
            .or(file.inputs)
            .unwrap_or_else(|| "gaussian".into())
            .as_str()
        {
            "gaussian" => InputKind::Gaussian,
            "orthogonal" => InputKind::Orthogonal,
            other => {
                return Err(usage(format!(
                    "unknown input kind {other:?} (expected gaussian|orthogonal)"
                )))
            }
        };
        if inputs == InputKind::Orthogonal && model.tokens > model.dim {
            return Err(usage(format!(
                "orthogonal inputs need tokens <= dim, got {} > {}",
                model.tokens, model.dim
            )));
        }

        Ok(Resolved {
            preset,
            model,
            seed: self.seed.or(file.seed).unwrap_or(0),
            batch: self.batch.or(file.batch).unwrap_or(1).max(1),
            weights,
            inputs,
            out: self.out.clone(),
            format: self.format.clone().or(file.format),
        })
    }
}
