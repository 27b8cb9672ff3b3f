//! Patched encoder forecaster: patch embedding of values and drift features,
//! interleaved temporal and spatial attention blocks, and summed linear and
//! covariate cross-attention heads.

pub mod checkpoint;
pub mod config;
pub mod forecast;
pub mod input;
pub mod layers;
pub mod network;
pub mod params;
pub mod real;

pub use checkpoint::{load_params, save_params};
pub use config::{LayerKind, ModelConfig};
pub use forecast::{forward_series, ForecastOutput};
pub use input::{ChannelNorm, CovSet, ModelInput, PatchLayout, Query};
pub use params::{param_breakdown, param_count, LayerParams, ModelParams, Tensor};
pub use real::Real;
