//! Turning normalized channels into the patch-level tensors the network eats.

use super::config::ModelConfig;
use super::real::Real;
use crate::dart_norm::{self, AnchorStats, EPS_STD};
use crate::error::{Error, Result};
use crate::series::ChannelRole;

/// Per-channel normalized values, drift features and the anchor statistics
/// available at every step.
#[derive(Debug, Clone)]
pub struct ChannelNorm {
    pub x: Vec<f64>,
    pub d: Vec<f64>,
    pub r: Vec<f64>,
    pub mask: Vec<bool>,
    pub anchors: Vec<AnchorStats>,
    /// Unclamped std at each step.
    pub s: Vec<f64>,
    pub count: Vec<u64>,
}

impl ChannelNorm {
    /// Causal rolling normalization.
    pub fn rolling(y: &[f64], mask: &[bool]) -> Result<Self> {
        let v = dart_norm::normalize(y, mask)?;
        let anchors = (0..y.len()).map(|t| v.stats.anchor(t)).collect();
        Ok(Self { x: v.x, d: v.d, r: v.r, mask: v.mask, anchors, s: v.stats.s, count: v.stats.count })
    }

    /// Static normalization with mean and std of the first `prefix` points;
    /// drift features are zero.
    pub fn fixed(y: &[f64], mask: &[bool], prefix: usize) -> Result<Self> {
        let prefix = prefix.min(y.len());
        let obs: Vec<f64> = y[..prefix].iter().zip(&mask[..prefix]).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
        if obs.is_empty() {
            return Err(Error::NoObservations);
        }
        let n = obs.len() as f64;
        let mean = obs.iter().sum::<f64>() / n;
        let s = (obs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let a = AnchorStats { mean, std: s.max(EPS_STD) };
        let x = y.iter().zip(mask).map(|(&v, &m)| if m { (v - a.mean) / a.std } else { 0.0 }).collect();
        Ok(Self {
            x,
            d: vec![0.0; y.len()],
            r: vec![0.0; y.len()],
            mask: mask.to_vec(),
            anchors: vec![a; y.len()],
            s: vec![s; y.len()],
            count: vec![obs.len() as u64; y.len()],
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Whether targets anchored at `t` are meaningful: at least one
    /// observation and a non-degenerate spread.
    pub fn anchor_valid(&self, t: usize) -> bool {
        self.count[t] > 0 && self.s[t] > EPS_STD
    }

    /// `(y[t+1..=t+n] - m_t) / s_t` with observed flags.
    pub fn targets(&self, y: &[f64], t: usize, n: usize) -> (Vec<f64>, Vec<bool>) {
        let a = self.anchors[t];
        (t + 1..t + 1 + n)
            .map(|u| if self.mask[u] { ((y[u] - a.mean) / a.std, true) } else { (0.0, false) })
            .unzip()
    }
}

/// Known-future covariate tokens for one forecast origin: patch-sized chunks
/// of normalized future values.
#[derive(Debug, Clone, PartialEq)]
pub struct CovSet<F> {
    /// `(n_tokens, patch_len)`.
    pub values: Vec<F>,
    /// Horizon chunk index of each token.
    pub chunks: Vec<usize>,
}

impl<F: Real> CovSet<F> {
    /// Chunks `future` (already normalized, one slice per covariate channel)
    /// into tokens; the final chunk is zero-padded.
    pub fn from_channels(future: &[Vec<f64>], patch_len: usize, max_chunks: usize) -> Self {
        let mut values = Vec::new();
        let mut chunks = Vec::new();
        for ch in future {
            for (k, chunk) in ch.chunks(patch_len).enumerate().take(max_chunks) {
                values.extend(chunk.iter().map(|&v| F::of(v)));
                values.extend(std::iter::repeat_n(F::zero(), patch_len - chunk.len()));
                chunks.push(k);
            }
        }
        Self { values, chunks }
    }

    pub fn n_tokens(&self) -> usize {
        self.chunks.len()
    }
}

/// A forecast request at one (channel, patch) position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub channel: usize,
    pub patch: usize,
    pub steps: usize,
    pub cov_set: Option<usize>,
}

/// Encoder input for one multivariate series.
#[derive(Debug, Clone)]
pub struct ModelInput<F> {
    pub n_channels: usize,
    pub n_patches: usize,
    /// `(channels, patches, 3 * patch_len)`; zero at missing and pad slots.
    pub features: Vec<F>,
    /// `(channels, patches, patch_len)`; true at missing and pad slots.
    pub missing: Vec<bool>,
    pub roles: Vec<ChannelRole>,
    pub queries: Vec<Query>,
    pub cov_sets: Vec<CovSet<F>>,
}

/// Patch layout of a context of `len` steps: left padding and the series
/// index at which each patch ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLayout {
    pub n_patches: usize,
    pub n_pad: usize,
    pub patch_len: usize,
}

impl PatchLayout {
    pub fn new(len: usize, patch_len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptySeries);
        }
        let n_patches = len.div_ceil(patch_len);
        Ok(Self { n_patches, n_pad: n_patches * patch_len - len, patch_len })
    }

    pub fn patch_end(&self, i: usize) -> usize {
        (i + 1) * self.patch_len - 1 - self.n_pad
    }
}

impl<F: Real> ModelInput<F> {
    /// Builds features from the first `ctx_len` steps of each channel.
    pub fn encode(
        cfg: &ModelConfig,
        norms: &[ChannelNorm],
        roles: &[ChannelRole],
        ctx_len: usize,
    ) -> Result<(Self, PatchLayout)> {
        if norms.len() != roles.len() || norms.is_empty() {
            return Err(Error::ShapeMismatch(format!("{} channels but {} roles", norms.len(), roles.len())));
        }
        if ctx_len > cfg.max_context {
            return Err(Error::InvalidArgument(format!(
                "context of {ctx_len} steps exceeds max_context {}",
                cfg.max_context
            )));
        }
        let p = cfg.patch_len;
        let layout = PatchLayout::new(ctx_len, p)?;
        let (c_n, n) = (norms.len(), layout.n_patches);
        let mut features = vec![F::zero(); c_n * n * 3 * p];
        let mut missing = vec![true; c_n * n * p];
        for (c, norm) in norms.iter().enumerate() {
            if norm.len() < ctx_len {
                return Err(Error::ShapeMismatch(format!("channel {c} shorter than context")));
            }
            for i in 0..n {
                let f = &mut features[(c * n + i) * 3 * p..][..3 * p];
                let m = &mut missing[(c * n + i) * p..][..p];
                for j in 0..p {
                    let padded = i * p + j;
                    if padded < layout.n_pad {
                        continue;
                    }
                    let t = padded - layout.n_pad;
                    if !norm.mask[t] {
                        continue;
                    }
                    m[j] = false;
                    f[j] = F::of(norm.x[t]);
                    f[p + j] = F::of(norm.d[t]);
                    f[2 * p + j] = F::of(norm.r[t]);
                }
            }
        }
        let input = Self {
            n_channels: c_n,
            n_patches: n,
            features,
            missing,
            roles: roles.to_vec(),
            queries: Vec::new(),
            cov_sets: Vec::new(),
        };
        Ok((input, layout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_left_pads() {
        let l = PatchLayout::new(33, 32).unwrap();
        assert_eq!((l.n_patches, l.n_pad), (2, 31));
        assert_eq!(l.patch_end(0), 0);
        assert_eq!(l.patch_end(1), 32);
    }

    #[test]
    fn fixed_norm_has_no_drift() {
        let y = [1.0, 2.0, 3.0, 10.0];
        let n = ChannelNorm::fixed(&y, &[true; 4], 3).unwrap();
        assert!(n.d.iter().chain(&n.r).all(|&v| v == 0.0));
        assert!((n.anchors[3].mean - 2.0).abs() < 1e-12);
        assert!((n.x[0] + 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn encode_marks_pad_and_missing() {
        let cfg = ModelConfig { patch_len: 4, max_context: 16, ..ModelConfig::toy() };
        let y = [1.0, 2.0, 0.0, 4.0, 5.0, 7.0];
        let mask = [true, true, false, true, true, true];
        let norm = ChannelNorm::rolling(&y, &mask).unwrap();
        let (inp, layout) = ModelInput::<f64>::encode(&cfg, &[norm.clone()], &[ChannelRole::Target], 6).unwrap();
        assert_eq!(layout.n_pad, 2);
        assert_eq!(inp.missing, vec![true, true, false, false, true, false, false, false]);
        assert_eq!(inp.features[3], norm.x[1]);
        assert_eq!(inp.features[12 + 4 + 2], norm.d[4]);
    }

    #[test]
    fn cov_set_chunks_and_pads() {
        let cs = CovSet::<f64>::from_channels(&[vec![1.0; 5], vec![2.0; 3]], 4, 10);
        assert_eq!(cs.chunks, vec![0, 1, 0]);
        assert_eq!(&cs.values[4..8], &[1.0, 0.0, 0.0, 0.0]);
    }
}
