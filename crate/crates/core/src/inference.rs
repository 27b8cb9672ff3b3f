//! Inference-time ensembling, feature augmentation and stride-interleaved
//! forecasting around any original-scale forecaster.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward_series, ModelConfig, ModelParams};
use crate::rng;
use crate::series::{strided_views, TimeSeries};
use crate::synthts::augment::{box_smooth, forward_fill};

/// Maps a history (plus the next `horizon` values of each known-future
/// channel) to original-scale forecasts, one row per forecast channel.
pub trait Forecaster {
    fn forecast(&self, series: &TimeSeries, horizon: usize, future: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>>;
}

impl<T> Forecaster for T
where
    T: Fn(&TimeSeries, usize, Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>>,
{
    fn forecast(&self, series: &TimeSeries, horizon: usize, future: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        self(series, horizon, future)
    }
}

/// The bare model: normalize, run the final position, denormalize with the
/// last anchor.
pub struct ModelForecaster<'a> {
    pub config: &'a ModelConfig,
    pub params: &'a ModelParams<f32>,
}

impl Forecaster for ModelForecaster<'_> {
    fn forecast(&self, series: &TimeSeries, horizon: usize, future: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        Ok(forward_series(self.config, self.params, series, horizon, future, false)?.denormalized())
    }
}

fn negate(series: &TimeSeries) -> TimeSeries {
    series.map_values(|_, _, v| -v)
}

/// `(f(y) - f(-y)) / 2`, negating every channel including known-future values.
pub fn mirror_ensemble(
    f: &dyn Forecaster,
    series: &TimeSeries,
    horizon: usize,
    future: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<f64>>> {
    let plus = f.forecast(series, horizon, future)?;
    let neg_future: Option<Vec<Vec<f64>>> = future.map(|fu| fu.iter().map(|r| r.iter().map(|v| -v).collect()).collect());
    let minus = f.forecast(&negate(series), horizon, neg_future.as_deref())?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) / 2.0).collect())
        .collect())
}

/// Mean over `k` forecasts of inputs perturbed with Gaussian noise of std
/// `noise_frac` times each channel's std. Known-future channels are left
/// untouched so their history stays consistent with the supplied future.
pub fn noise_ensemble(
    f: &dyn Forecaster,
    series: &TimeSeries,
    horizon: usize,
    future: Option<&[Vec<f64>]>,
    k: usize,
    noise_frac: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("noise ensemble needs k >= 1".into()));
    }
    let stds: Vec<f64> = (0..series.n_channels()).map(|c| series.channel_std(c)).collect();
    // Members are accumulated as offsets from the first one, so identical
    // members average back to it exactly.
    let mut first: Option<Vec<Vec<f64>>> = None;
    let mut offsets: Vec<Vec<f64>> = Vec::new();
    for m in 0..k {
        let mut r = rng::child(seed, m as u64);
        let noisy = series.map_values(|c, _, v| {
            let sd = noise_frac * stds[c];
            if sd > 0.0 && !series.known_future().contains(&c) && v.is_finite() {
                v + Normal::new(0.0, sd).expect("finite std").sample(&mut r)
            } else {
                v
            }
        });
        let out = f.forecast(&noisy, horizon, future)?;
        match &first {
            None => {
                offsets = out.iter().map(|row| vec![0.0; row.len()]).collect();
                first = Some(out);
            }
            Some(base) => {
                for ((acc, b), o) in offsets.iter_mut().zip(base).zip(out) {
                    for ((x, &b), y) in acc.iter_mut().zip(b).zip(o) {
                        *x += y - b;
                    }
                }
            }
        }
    }
    let mut mean = first.expect("k >= 1");
    for (row, acc) in mean.iter_mut().zip(&offsets) {
        for (v, &d) in row.iter_mut().zip(acc) {
            *v += d / k as f64;
        }
    }
    Ok(mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentTransform {
    SignedSquare,
    SignedSqrt,
    /// Centered width-5 box smoothing, truncated at both ends.
    Smoothed,
}

impl AugmentTransform {
    pub fn name(self) -> &'static str {
        match self {
            AugmentTransform::SignedSquare => "signed_square",
            AugmentTransform::SignedSqrt => "signed_sqrt",
            AugmentTransform::Smoothed => "smoothed",
        }
    }

    pub fn apply(self, y: &[f64]) -> Vec<f64> {
        match self {
            AugmentTransform::SignedSquare => y.iter().map(|v| v.signum() * v * v).collect(),
            AugmentTransform::SignedSqrt => y.iter().map(|v| v.signum() * v.abs().sqrt()).collect(),
            AugmentTransform::Smoothed => box_smooth(&forward_fill(y), 2),
        }
    }
}

/// Appends transforms of the target channel as covariate channels.
pub fn augment_features(series: &TimeSeries, transforms: &[AugmentTransform]) -> Result<TimeSeries> {
    let tc = series.target_channel();
    let y = series.channel(tc);
    let mask = series.channel_mask(tc).to_vec();
    let mut out = series.clone();
    for t in transforms {
        let name = format!("{}_{}", series.names()[tc], t.name());
        out.push_channel(name, t.apply(y), mask.clone())?;
    }
    Ok(out)
}

/// Forecasts each of the `n` strided views for `ceil(h / n)` steps and
/// interleaves them back onto the original grid. The earliest `T mod n` points
/// are dropped so that every view ends right before its first forecast step.
pub fn sifi_forecast(
    f: &dyn Forecaster,
    series: &TimeSeries,
    n: usize,
    horizon: usize,
    future: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    if n > series.len() {
        return Err(Error::StrideExceedsLength { stride: n, len: series.len() });
    }
    if n == 1 {
        return f.forecast(series, horizon, future);
    }
    let trimmed = series.tail(series.len() - series.len() % n)?;
    let coarse_h = horizon.div_ceil(n);
    let mut out: Option<Vec<Vec<f64>>> = None;
    for (k, view) in strided_views(&trimmed, n)?.into_iter().enumerate() {
        let view_future: Option<Vec<Vec<f64>>> = future.map(|fu| {
            fu.iter()
                .map(|row| (0..coarse_h).map(|j| row.get(k + j * n).copied().unwrap_or(f64::NAN)).collect())
                .collect()
        });
        let pred = f.forecast(&view.to_series(), coarse_h, view_future.as_deref())?;
        let dst = out.get_or_insert_with(|| vec![vec![f64::NAN; horizon]; pred.len()]);
        for (row, p) in dst.iter_mut().zip(&pred) {
            for (j, &v) in p.iter().enumerate().take(coarse_h) {
                let t = k + j * n;
                if t < horizon {
                    row[t] = v;
                }
            }
        }
    }
    Ok(out.expect("n >= 2 views"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SifiStride {
    /// `ceil(T / max_context)`: 1 unless the history is too long.
    Auto,
    #[serde(untagged)]
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub use_mirror: bool,
    pub noise_ensembles: usize,
    pub noise_frac: f64,
    pub augment_channels: Vec<AugmentTransform>,
    pub sifi_stride: SifiStride,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            use_mirror: false,
            noise_ensembles: 0,
            noise_frac: 0.01,
            augment_channels: Vec::new(),
            sifi_stride: SifiStride::Auto,
            seed: 0,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_frac >= 0.0) {
            return Err(Error::Config("noise_frac must be >= 0".into()));
        }
        if self.sifi_stride == SifiStride::Fixed(0) {
            return Err(Error::Config("sifi_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn stride_for(&self, len: usize, max_context: usize) -> usize {
        match self.sifi_stride {
            SifiStride::Auto => len.div_ceil(max_context).max(1),
            SifiStride::Fixed(n) => n,
        }
    }
}

/// Which enhancements were applied, in application order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub augmented: Vec<AugmentTransform>,
    pub sifi_stride: usize,
    pub mirror: bool,
    pub noise_members: usize,
    pub noise_frac: f64,
    pub history_used: usize,
    /// Nesting of the ensembles around each forward call.
    pub ensemble_order: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    /// Channel indices into the input series.
    pub channels: Vec<usize>,
    pub names: Vec<String>,
    /// `[channel][step]` in original scale.
    pub values: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

struct Ensembled<'a> {
    inner: &'a dyn Forecaster,
    mirror: bool,
    noise: usize,
    noise_frac: f64,
    seed: u64,
}

impl Forecaster for Ensembled<'_> {
    fn forecast(&self, series: &TimeSeries, horizon: usize, future: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        let base = |s: &TimeSeries, h: usize, fu: Option<&[Vec<f64>]>| {
            if self.mirror {
                mirror_ensemble(self.inner, s, h, fu)
            } else {
                self.inner.forecast(s, h, fu)
            }
        };
        if self.noise > 0 {
            noise_ensemble(&base, series, horizon, future, self.noise, self.noise_frac, self.seed)
        } else {
            base(series, horizon, future)
        }
    }
}

/// Full inference pipeline: feature augmentation, then SIFI or a direct call,
/// with mirror and noise ensembling around every model call.
pub fn predict_with(
    f: &dyn Forecaster,
    max_context: usize,
    series: &TimeSeries,
    horizon: usize,
    future: Option<&[Vec<f64>]>,
    cfg: &InferenceConfig,
) -> Result<ForecastResult> {
    cfg.validate()?;
    let channels = series.forecast_channels();
    let augmented = if cfg.augment_channels.is_empty() {
        series.clone()
    } else {
        augment_features(series, &cfg.augment_channels)?
    };
    let stride = cfg.stride_for(series.len(), max_context);
    let keep = (max_context * stride).min(series.len());
    let history = if keep < augmented.len() { augmented.tail(keep)? } else { augmented };
    let ens = Ensembled { inner: f, mirror: cfg.use_mirror, noise: cfg.noise_ensembles, noise_frac: cfg.noise_frac, seed: cfg.seed };
    let mut values = if stride > 1 {
        sifi_forecast(&ens, &history, stride, horizon, future)?
    } else {
        ens.forecast(&history, horizon, future)?
    };
    // Augmented covariates are appended last, so their rows come last too.
    values.truncate(channels.len());
    let names = channels.iter().map(|&c| series.names()[c].clone()).collect();
    let provenance = Provenance {
        augmented: cfg.augment_channels.clone(),
        sifi_stride: stride,
        mirror: cfg.use_mirror,
        noise_members: cfg.noise_ensembles,
        noise_frac: cfg.noise_frac,
        history_used: history.len(),
        ensemble_order: match (cfg.noise_ensembles > 0, cfg.use_mirror) {
            (true, true) => "noise(mirror(model))",
            (true, false) => "noise(model)",
            (false, true) => "mirror(model)",
            (false, false) => "model",
        }
        .into(),
    };
    Ok(ForecastResult { channels, names, values, provenance })
}

pub fn predict(
    model: &ModelConfig,
    params: &ModelParams<f32>,
    series: &TimeSeries,
    horizon: usize,
    future: Option<&[Vec<f64>]>,
    cfg: &InferenceConfig,
) -> Result<ForecastResult> {
    let f = ModelForecaster { config: model, params };
    predict_with(&f, model.max_context, series, horizon, future, cfg)
}
