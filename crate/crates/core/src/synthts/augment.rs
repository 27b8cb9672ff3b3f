//! Univariate expansions, sparse mixing and post-transforms.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::AugmentationConfig;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expansion {
    Shift { k: isize },
    BoxSmooth { half_width: usize },
    GaussSmooth { sigma: f64 },
    Ar { alpha: f64 },
}

impl Expansion {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Expansion::Shift { k } => shift(x, k),
            Expansion::BoxSmooth { half_width } => box_smooth(x, half_width),
            Expansion::GaussSmooth { sigma } => gaussian_smooth(x, sigma),
            Expansion::Ar { alpha } => ar_filter(x, alpha),
        }
    }

    pub fn sample(rng: &mut Rng, len: usize) -> Self {
        let max_shift = (len / 8).clamp(1, 64) as i64;
        match rng.random_range(0..4) {
            0 => Expansion::Shift { k: rng.random_range(-max_shift..=max_shift) as isize },
            1 => Expansion::BoxSmooth { half_width: rng.random_range(1..=12) },
            2 => Expansion::GaussSmooth { sigma: rng.random_range(0.5..8.0) },
            _ => Expansion::Ar { alpha: rng.random_range(0.1..0.95) },
        }
    }
}

/// `z_t = x_{t-k}`, edge-padded on both sides.
pub fn shift(x: &[f64], k: isize) -> Vec<f64> {
    let n = x.len() as isize;
    (0..n).map(|t| x[(t - k).clamp(0, n - 1) as usize]).collect()
}

fn smooth_with(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let n = x.len() as isize;
    (0..n)
        .map(|t| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (j, w) in kernel.iter().enumerate() {
                let u = t + j as isize - r;
                if (0..n).contains(&u) {
                    acc += w * x[u as usize];
                    wsum += w;
                }
            }
            acc / wsum
        })
        .collect()
}

/// Centered moving average over `2 * half_width + 1` points, renormalized at
/// the edges.
pub fn box_smooth(x: &[f64], half_width: usize) -> Vec<f64> {
    smooth_with(x, &vec![1.0; 2 * half_width + 1])
}

pub fn gaussian_smooth(x: &[f64], sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    smooth_with(x, &kernel)
}

/// `z_t = alpha * z_{t-1} + x_t`.
pub fn ar_filter(x: &[f64], alpha: f64) -> Vec<f64> {
    let mut z = 0.0;
    x.iter()
        .map(|&v| {
            z = alpha * z + v;
            z
        })
        .collect()
}

pub fn univariate_expansions(x: &[f64], rng: &mut Rng, cfg: &AugmentationConfig) -> Vec<Vec<f64>> {
    let [lo, hi] = cfg.n_expansions_range;
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| Expansion::sample(rng, x.len()).apply(x)).collect()
}

pub fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
}

/// `sum_i w_i * pool[i]` plus Gaussian noise with std `noise_level` times the
/// std of the combination.
pub fn mix(pool: &[Vec<f64>], weights: &[(usize, f64)], noise_level: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; pool[weights[0].0].len()];
    for &(i, w) in weights {
        for (o, v) in out.iter_mut().zip(&pool[i]) {
            *o += w * v;
        }
    }
    let s = std_dev(&out);
    if noise_level > 0.0 && s > 0.0 {
        let dist = Normal::new(0.0, noise_level * s).expect("finite std");
        for o in &mut out {
            *o += dist.sample(rng);
        }
    }
    out
}

/// Number of nonzero weights: `1 + Poisson(mix_sparsity - 1)`, capped at
/// `min(5, pool_len)`.
pub fn sample_nnz(rng: &mut Rng, mix_sparsity: usize, pool_len: usize) -> usize {
    let extra = if mix_sparsity > 1 {
        Poisson::new((mix_sparsity - 1) as f64).expect("positive rate").sample(rng) as usize
    } else {
        0
    };
    (1 + extra).min(5).min(pool_len)
}

/// `n_out` sparse random combinations of `pool`. Weights are drawn relative to
/// each input's scale so no single input swamps the others.
pub fn sparse_mix(
    pool: &[Vec<f64>],
    n_out: usize,
    rng: &mut Rng,
    cfg: &AugmentationConfig,
    noise_level: f64,
) -> Vec<Vec<f64>> {
    assert!(!pool.is_empty(), "sparse_mix needs a nonempty pool");
    (0..n_out)
        .map(|_| {
            let k = sample_nnz(rng, cfg.mix_sparsity, pool.len());
            let idx = rand::seq::index::sample(rng, pool.len(), k);
            let weights: Vec<(usize, f64)> = idx
                .into_iter()
                .map(|i| {
                    let s = std_dev(&pool[i]);
                    let scale = if s > 1e-12 { 1.0 / s } else { 1.0 };
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    (i, sign * rng.random_range(0.5..1.5) * scale)
                })
                .collect();
            mix(pool, &weights, noise_level, rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostTransform {
    Identity,
    ReluFloor,
    Modulation,
    Missing,
    Outliers,
    Spikes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostTransformWeights {
    pub identity: f64,
    pub relu_floor: f64,
    pub modulation: f64,
    pub missing: f64,
    pub outliers: f64,
    pub spikes: f64,
}

impl Default for PostTransformWeights {
    fn default() -> Self {
        Self { identity: 0.3, relu_floor: 0.15, modulation: 0.2, missing: 0.1, outliers: 0.1, spikes: 0.15 }
    }
}

impl PostTransformWeights {
    pub fn entries(&self) -> [(PostTransform, f64); 6] {
        [
            (PostTransform::Identity, self.identity),
            (PostTransform::ReluFloor, self.relu_floor),
            (PostTransform::Modulation, self.modulation),
            (PostTransform::Missing, self.missing),
            (PostTransform::Outliers, self.outliers),
            (PostTransform::Spikes, self.spikes),
        ]
    }

    pub fn sample(&self, rng: &mut Rng) -> PostTransform {
        let e = self.entries();
        let total: f64 = e.iter().map(|x| x.1).sum();
        let mut u = rng.random_range(0.0..total);
        for (t, w) in e {
            if u < w {
                return t;
            }
            u -= w;
        }
        PostTransform::Identity
    }
}

/// Scales into [0, 1]; `None` for constant input.
pub fn min_max_scale(x: &[f64]) -> Option<Vec<f64>> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    (span > 0.0 && span.is_finite()).then(|| x.iter().map(|v| (v - lo) / span).collect())
}

/// `ReLU(MinMaxScale(x) - 0.5)`; identity on constant input.
pub fn relu_floor(x: &[f64]) -> Vec<f64> {
    match min_max_scale(x) {
        Some(s) => s.into_iter().map(|v| (v - 0.5).max(0.0)).collect(),
        None => x.to_vec(),
    }
}

/// `x1 * MinMaxScale(x2)`; identity on constant `x2`.
pub fn modulate(x1: &[f64], x2: &[f64]) -> Vec<f64> {
    match min_max_scale(x2) {
        Some(s) => x1.iter().zip(s).map(|(a, b)| a * b).collect(),
        None => x1.to_vec(),
    }
}

/// Replaces a `rate` fraction of points with NaN.
pub fn inject_missing(x: &[f64], rate: f64, rng: &mut Rng) -> Vec<f64> {
    if rate <= 0.0 {
        return x.to_vec();
    }
    x.iter().map(|&v| if rng.random_bool(rate.min(1.0)) { f64::NAN } else { v }).collect()
}

/// Two-sided jumps of `scale` standard deviations at a `rate` fraction of points.
pub fn inject_outliers(x: &[f64], rate: f64, scale: f64, rng: &mut Rng) -> Vec<f64> {
    let s = std_dev(x).max(1e-6);
    x.iter()
        .map(|&v| {
            if rng.random_bool(rate.clamp(0.0, 1.0)) {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                v + sign * scale * s * rng.random_range(1.0..2.0)
            } else {
                v
            }
        })
        .collect()
}

/// Upward spikes that decay geometrically over a few steps.
pub fn inject_spikes(x: &[f64], rate: f64, scale: f64, rng: &mut Rng) -> Vec<f64> {
    let s = std_dev(x).max(1e-6);
    let mut out = x.to_vec();
    let mut bump = 0.0;
    for v in &mut out {
        bump *= 0.5;
        if rng.random_bool(rate.clamp(0.0, 1.0)) {
            bump += scale * s * rng.random_range(0.5..1.5);
        }
        *v += bump;
    }
    out
}

/// Applies one transform drawn from `cfg.post_transform_weights`. `x2` feeds
/// amplitude modulation; without it modulation is skipped.
pub fn post_transform(x: &[f64], x2: Option<&[f64]>, rng: &mut Rng, cfg: &AugmentationConfig) -> Vec<f64> {
    apply_post(cfg.post_transform_weights.sample(rng), x, x2, rng, cfg)
}

pub fn apply_post(t: PostTransform, x: &[f64], x2: Option<&[f64]>, rng: &mut Rng, cfg: &AugmentationConfig) -> Vec<f64> {
    match t {
        PostTransform::Identity => x.to_vec(),
        PostTransform::ReluFloor => relu_floor(x),
        PostTransform::Modulation => match x2 {
            Some(x2) => modulate(x, x2),
            None => x.to_vec(),
        },
        PostTransform::Missing => {
            let [lo, hi] = cfg.missing_rate_range;
            let rate = if hi > lo { rng.random_range(lo..hi) } else { lo };
            inject_missing(x, rate, rng)
        }
        PostTransform::Outliers => inject_outliers(x, cfg.outlier_rate, 6.0, rng),
        PostTransform::Spikes => inject_spikes(x, cfg.spike_rate, 5.0, rng),
    }
}

/// Forward fill of NaN, with leading gaps taking the first finite value.
pub fn forward_fill(x: &[f64]) -> Vec<f64> {
    let first = x.iter().copied().find(|v| v.is_finite()).unwrap_or(0.0);
    let mut last = first;
    x.iter()
        .map(|&v| {
            if v.is_finite() {
                last = v;
            }
            last
        })
        .collect()
}
