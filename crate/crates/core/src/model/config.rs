use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub patch_len: usize,
    pub hidden_size: usize,
    pub n_temporal_layers: usize,
    pub n_spatial_layers: usize,
    pub n_heads: usize,
    pub ffn_mult: f64,
    pub max_context: usize,
    pub max_horizon: usize,
    pub n_pad_tokens: usize,
    /// Steps supervised at every interior patch position.
    pub head_horizon_per_patch: usize,
    /// Rank of the factorized linear forecast head.
    pub head_rank: usize,
    /// Width of the covariate cross-attention head.
    pub cross_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::toy()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Temporal,
    Spatial,
}

impl ModelConfig {
    /// Small configuration used for tests and the desk-scale experiments.
    pub fn toy() -> Self {
        Self {
            patch_len: 32,
            hidden_size: 64,
            n_temporal_layers: 4,
            n_spatial_layers: 2,
            n_heads: 4,
            ffn_mult: 8.0 / 3.0,
            max_context: 4096,
            max_horizon: 960,
            n_pad_tokens: 4,
            head_horizon_per_patch: 32,
            head_rank: 24,
            cross_dim: 8,
        }
    }

    /// Full-size configuration (about 23M parameters).
    pub fn full() -> Self {
        Self {
            patch_len: 32,
            hidden_size: 512,
            n_temporal_layers: 6,
            n_spatial_layers: 3,
            n_heads: 8,
            ffn_mult: 8.0 / 3.0,
            max_context: 4096,
            max_horizon: 960,
            n_pad_tokens: 4,
            head_horizon_per_patch: 32,
            head_rank: 512,
            cross_dim: 64,
        }
    }

    pub fn ffn_dim(&self) -> usize {
        (((self.ffn_mult * self.hidden_size as f64) / 8.0).floor() as usize * 8).max(8)
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.n_heads
    }

    pub fn n_layers(&self) -> usize {
        self.n_temporal_layers + self.n_spatial_layers
    }

    /// Number of patch-sized chunks spanning `max_horizon`.
    pub fn horizon_chunks(&self) -> usize {
        self.max_horizon.div_ceil(self.patch_len)
    }

    /// Layer stack in the repeating pattern temporal, temporal, spatial.
    pub fn layer_kinds(&self) -> Vec<LayerKind> {
        (0..self.n_spatial_layers)
            .flat_map(|_| [LayerKind::Temporal, LayerKind::Temporal, LayerKind::Spatial])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.patch_len == 0 || self.hidden_size == 0 || self.n_heads == 0 {
            return fail("patch_len, hidden_size and n_heads must be positive".into());
        }
        if self.n_spatial_layers == 0 || self.n_temporal_layers != 2 * self.n_spatial_layers {
            return fail(format!(
                "n_temporal_layers ({}) must equal 2 * n_spatial_layers ({})",
                self.n_temporal_layers, self.n_spatial_layers
            ));
        }
        if self.hidden_size % self.n_heads != 0 {
            return fail(format!(
                "hidden_size {} not divisible by n_heads {}",
                self.hidden_size, self.n_heads
            ));
        }
        if self.head_dim() % 2 != 0 {
            return fail("head dimension must be even for rotary encoding".into());
        }
        if self.max_context % self.patch_len != 0 {
            return fail(format!(
                "max_context {} not divisible by patch_len {}",
                self.max_context, self.patch_len
            ));
        }
        if self.max_horizon == 0 || self.head_horizon_per_patch == 0 {
            return fail("horizons must be positive".into());
        }
        if self.head_horizon_per_patch > self.max_horizon {
            return fail("head_horizon_per_patch exceeds max_horizon".into());
        }
        if self.head_rank == 0 || self.cross_dim == 0 {
            return fail("head_rank and cross_dim must be positive".into());
        }
        if !(self.ffn_mult > 0.0) {
            return fail("ffn_mult must be positive".into());
        }
        Ok(())
    }
}
