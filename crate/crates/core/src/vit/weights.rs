//! Named weight tensors: manifest + blob file format, synthetic generation,
//! and the typed per-block view consumed by the forward pass.
//!
//! On disk the store is a UTF-8 JSON manifest listing
//! `{name, shape, dtype: "f32", byte_offset}` entries next to a single raw
//! little-endian `f32` blob. The loader validates the blob length against the
//! manifest before accepting anything.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::numkern::{Mat, Real};
use crate::{Error, Result};

pub const WEIGHT_FORMAT: &str = "tokreduce-weights-v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Named `f32` tensors for one encoder.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    blob: String,
    blob_len: u64,
    tensors: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    byte_offset: u64,
}

impl WeightStore {
    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) {
        let t = Tensor { shape, data };
        debug_assert_eq!(t.numel(), t.data.len());
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::WeightStore(format!("missing tensor {name:?}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    fn mat<R: Real>(&self, name: &str) -> Result<Mat<R>> {
        let t = self.get(name)?;
        if t.shape.len() != 2 {
            return Err(Error::WeightStore(format!(
                "tensor {name:?} has shape {:?}, expected a matrix",
                t.shape
            )));
        }
        Mat::from_vec(
            t.shape[0],
            t.shape[1],
            t.data.iter().map(|&v| R::from_f64(v as f64)).collect(),
        )
    }

    fn row<R: Real>(&self, name: &str) -> Result<Vec<R>> {
        let t = self.get(name)?;
        Ok(t.data.iter().map(|&v| R::from_f64(v as f64)).collect())
    }

    /// Writes the manifest at `manifest_path` and the blob next to it
    /// (same stem, `.bin` extension). Tensor order is by name, so the same
    /// store always produces byte-identical files.
    pub fn save(&self, manifest_path: &Path) -> Result<()> {
        let blob_path = manifest_path.with_extension("bin");
        let blob_name = blob_path
            .file_name()
            .ok_or_else(|| Error::InvalidArgument("manifest path has no file name".into()))?
            .to_string_lossy()
            .into_owned();

        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut blob: Vec<u8> = Vec::new();
        for (name, t) in &self.tensors {
            entries.push(ManifestEntry {
                name: name.clone(),
                shape: t.shape.clone(),
                dtype: "f32".into(),
                byte_offset: blob.len() as u64,
            });
            for v in &t.data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest {
            format: WEIGHT_FORMAT.into(),
            blob: blob_name,
            blob_len: blob.len() as u64,
            tensors: entries,
        };
        std::fs::File::create(&blob_path)?.write_all(&blob)?;
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::WeightStore(format!("manifest encode: {e}")))?;
        std::fs::write(manifest_path, json)?;
        Ok(())
    }

    /// Loads a manifest + blob pair, validating the blob length and every
    /// tensor extent before accepting it.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(manifest_path)?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::WeightStore(format!("manifest parse: {e}")))?;
        if manifest.format != WEIGHT_FORMAT {
            return Err(Error::WeightStore(format!(
                "unsupported format {:?}",
                manifest.format
            )));
        }
        let blob_path = manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&manifest.blob);
        let mut blob = Vec::new();
        std::fs::File::open(&blob_path)?.read_to_end(&mut blob)?;
        if blob.len() as u64 != manifest.blob_len {
            return Err(Error::WeightStore(format!(
                "blob is {} bytes, manifest says {}",
                blob.len(),
                manifest.blob_len
            )));
        }
        let mut store = WeightStore::default();
        for entry in &manifest.tensors {
            if entry.dtype != "f32" {
                return Err(Error::WeightStore(format!(
                    "tensor {:?} has dtype {:?}, only f32 is supported",
                    entry.name, entry.dtype
                )));
            }
            let numel: usize = entry.shape.iter().product();
            let start = entry.byte_offset as usize;
            let end = start + numel * 4;
            if end > blob.len() {
                return Err(Error::WeightStore(format!(
                    "tensor {:?} extends to byte {} past blob end {}",
                    entry.name,
                    end,
                    blob.len()
                )));
            }
            let data: Vec<f32> = blob[start..end]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            store.insert(entry.name.clone(), entry.shape.clone(), data);
        }
        Ok(store)
    }

    /// Seeded random weights at the shapes demanded by `cfg`. Linear weights,
    /// biases and embeddings draw from N(0, 1/sqrt(d)); layernorm scales are
    /// centered at 1 so activations keep a sane magnitude at depth.
    pub fn synthetic(cfg: &ModelConfig, seed: u64) -> WeightStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = 1.0 / (cfg.dim as f64).sqrt();
        let normal = Normal::new(0.0f32, sigma as f32).expect("sigma is positive");
        let mut store = WeightStore::default();
        for (name, shape) in tensor_specs(cfg) {
            let numel: usize = shape.iter().product();
            let base = if name.ends_with("norm1.weight")
                || name.ends_with("norm2.weight")
                || name == "norm.weight"
            {
                1.0f32
            } else {
                0.0f32
            };
            let data: Vec<f32> = (0..numel).map(|_| base + normal.sample(&mut rng)).collect();
            store.insert(name, shape, data);
        }
        store
    }
}

/// Canonical tensor names and shapes for a config, in generation order.
pub fn tensor_specs(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let d = cfg.dim;
    let h = cfg.mlp_hidden();
    let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
    if cfg.has_class_token {
        specs.push(("cls_token".into(), vec![1, d]));
    }
    specs.push(("pos_embed".into(), vec![cfg.tokens, d]));
    for i in 0..cfg.layers {
        let p = format!("blocks.{i}");
        specs.push((format!("{p}.norm1.weight"), vec![d]));
        specs.push((format!("{p}.norm1.bias"), vec![d]));
        specs.push((format!("{p}.attn.qkv.weight"), vec![3 * d, d]));
        specs.push((format!("{p}.attn.qkv.bias"), vec![3 * d]));
        specs.push((format!("{p}.attn.proj.weight"), vec![d, d]));
        specs.push((format!("{p}.attn.proj.bias"), vec![d]));
        specs.push((format!("{p}.norm2.weight"), vec![d]));
        specs.push((format!("{p}.norm2.bias"), vec![d]));
        specs.push((format!("{p}.mlp.fc1.weight"), vec![h, d]));
        specs.push((format!("{p}.mlp.fc1.bias"), vec![h]));
        specs.push((format!("{p}.mlp.fc2.weight"), vec![d, h]));
        specs.push((format!("{p}.mlp.fc2.bias"), vec![d]));
    }
    specs.push(("norm.weight".into(), vec![d]));
    specs.push(("norm.bias".into(), vec![d]));
    specs.push(("head.weight".into(), vec![cfg.num_classes, d]));
    specs.push(("head.bias".into(), vec![cfg.num_classes]));
    specs
}

/// Weights of one transformer block, converted to the working precision.
#[derive(Clone, Debug)]
pub struct BlockWeights<R: Real> {
    pub norm1_w: Vec<R>,
    pub norm1_b: Vec<R>,
    pub qkv_w: Mat<R>,
    pub qkv_b: Vec<R>,
    pub proj_w: Mat<R>,
    pub proj_b: Vec<R>,
    pub norm2_w: Vec<R>,
    pub norm2_b: Vec<R>,
    pub fc1_w: Mat<R>,
    pub fc1_b: Vec<R>,
    pub fc2_w: Mat<R>,
    pub fc2_b: Vec<R>,
}

/// The full encoder's weights in working precision, shape-checked against a
/// [`ModelConfig`].
#[derive(Clone, Debug)]
pub struct EncoderWeights<R: Real> {
    pub blocks: Vec<BlockWeights<R>>,
    pub norm_w: Vec<R>,
    pub norm_b: Vec<R>,
    pub head_w: Mat<R>,
    pub head_b: Vec<R>,
    pub cls_token: Option<Vec<R>>,
    pub pos_embed: Mat<R>,
}

fn expect_shape(store: &WeightStore, name: &str, shape: &[usize]) -> Result<()> {
    let t = store.get(name)?;
    if t.shape != shape {
        return Err(Error::WeightStore(format!(
            "tensor {name:?} has shape {:?}, config wants {:?}",
            t.shape, shape
        )));
    }
    Ok(())
}

impl<R: Real> EncoderWeights<R> {
    pub fn from_store(store: &WeightStore, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        for (name, shape) in tensor_specs(cfg) {
            expect_shape(store, &name, &shape)?;
        }
        let blocks = (0..cfg.layers)
            .map(|i| {
                let p = format!("blocks.{i}");
                Ok(BlockWeights {
                    norm1_w: store.row(&format!("{p}.norm1.weight"))?,
                    norm1_b: store.row(&format!("{p}.norm1.bias"))?,
                    qkv_w: store.mat(&format!("{p}.attn.qkv.weight"))?,
                    qkv_b: store.row(&format!("{p}.attn.qkv.bias"))?,
                    proj_w: store.mat(&format!("{p}.attn.proj.weight"))?,
                    proj_b: store.row(&format!("{p}.attn.proj.bias"))?,
                    norm2_w: store.row(&format!("{p}.norm2.weight"))?,
                    norm2_b: store.row(&format!("{p}.norm2.bias"))?,
                    fc1_w: store.mat(&format!("{p}.mlp.fc1.weight"))?,
                    fc1_b: store.row(&format!("{p}.mlp.fc1.bias"))?,
                    fc2_w: store.mat(&format!("{p}.mlp.fc2.weight"))?,
                    fc2_b: store.row(&format!("{p}.mlp.fc2.bias"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncoderWeights {
            blocks,
            norm_w: store.row("norm.weight")?,
            norm_b: store.row("norm.bias")?,
            head_w: store.mat("head.weight")?,
            head_b: store.row("head.bias")?,
            cls_token: cfg
                .has_class_token
                .then(|| store.row("cls_token"))
                .transpose()?,
            pos_embed: store.mat("pos_embed")?,
        })
    }
}

/// Seeded synthetic input batch: patch tokens from N(0, 1/sqrt(d)) with the
/// stored class token prepended when the model has one. The input stream is
/// decoupled from the weight stream so the same seed can drive both.
pub fn synthetic_inputs<R: Real>(
    cfg: &ModelConfig,
    weights: &EncoderWeights<R>,
    seed: u64,
    batch: usize,
) -> Vec<Mat<R>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x696e_7075); // "inpu"
    let sigma = (1.0 / (cfg.dim as f64).sqrt()) as f32;
    let normal = Normal::new(0.0f32, sigma).expect("sigma is positive");
    let patches = cfg.patch_tokens();
    (0..batch)
        .map(|_| {
            let mut data: Vec<R> = Vec::with_capacity(cfg.tokens * cfg.dim);
            if let Some(cls) = &weights.cls_token {
                data.extend_from_slice(cls);
            }
            for _ in 0..patches * cfg.dim {
                data.push(R::from_f64(normal.sample(&mut rng) as f64));
            }
            Mat::from_vec(cfg.tokens, cfg.dim, data).expect("sized by construction")
        })
        .collect()
}
