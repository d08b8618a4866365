//! Token reduction as matrix transformation.
//!
//! A reduction layer maps `N` tokens to `M < N` tokens as `Y = W * X`,
//! where the structure of the `M x N` transformation matrix `W` decides the
//! flavor of the reduction: one-hot rows select tokens (pruning), block-wise
//! rows average groups (merging), and dense rows mix every token into every
//! surviving token (transforming). This crate builds `W` from attention
//! statistics and token similarity, embeds the reduction in a minimal ViT
//! encoder with attention scaling, and ships an analytic MAC cost model so
//! the savings can be audited without a GPU in sight.
//!
//! Modules:
//! - [`numkern`]: dense matrix/vector kernels (f64 by default, f32 for bench runs)
//! - [`reducer`]: transformation-matrix construction plus prune/merge baselines
//! - [`vit`]: minimal pre-norm ViT encoder with scaled attention and reduction stages
//! - [`recovery`]: nearest-neighbor token recovery for dense outputs
//! - [`flops`]: analytic per-layer MAC accounting

pub mod flops;
pub mod numkern;
pub mod recovery;
pub mod reducer;
pub mod vit;

mod error;

pub use error::{Error, Result};
pub use numkern::{Mat, Matrix, Real};
pub use reducer::{ReduceMode, ReducerConfig, Reduction};
pub use vit::{EncoderWeights, ForwardOutput, ModelConfig, WeightStore};
