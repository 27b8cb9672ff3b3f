use super::config::ModelConfig;
use super::input::{ChannelNorm, CovSet, ModelInput, Query};
use super::network;
use super::params::ModelParams;
use super::real::Real;
use crate::dart_norm::{self, AnchorStats};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Dense per-patch predictions plus the long-horizon forecast from the final
/// patch, all in normalized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastOutput {
    /// Forecast channel indices into the input series.
    pub channels: Vec<usize>,
    pub horizon: usize,
    /// Series index at which each patch ends.
    pub patch_ends: Vec<usize>,
    /// `[channel][patch]` predictions of `min(head_horizon_per_patch, horizon)`
    /// steps; empty when only the final position was requested.
    pub per_patch: Vec<Vec<Vec<f64>>>,
    /// `[channel]` predictions of `horizon` steps after the last observation.
    pub final_pred: Vec<Vec<f64>>,
    /// `[channel][patch]` normalization statistics at each patch end.
    pub anchors: Vec<Vec<AnchorStats>>,
}

impl ForecastOutput {
    /// Final-position forecasts mapped back to the original scale.
    pub fn denormalized(&self) -> Vec<Vec<f64>> {
        self.final_pred
            .iter()
            .zip(&self.anchors)
            .map(|(pred, a)| dart_norm::denormalize(pred, *a.last().expect("at least one patch")))
            .collect()
    }
}

/// Normalizes, patches and runs the model on `series`, predicting every
/// channel that is not a known-future covariate.
///
/// `future` holds the next `horizon` values of each known-future channel, in
/// ascending channel order. With `dense` unset only the final position is
/// evaluated.
pub fn forward_series<F: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<F>,
    series: &TimeSeries,
    horizon: usize,
    future: Option<&[Vec<f64>]>,
    dense: bool,
) -> Result<ForecastOutput> {
    if horizon == 0 || horizon > cfg.max_horizon {
        return Err(Error::HorizonTooLong { requested: horizon, max_feasible: cfg.max_horizon });
    }
    let norms = (0..series.n_channels())
        .map(|c| ChannelNorm::rolling(series.channel(c), series.channel_mask(c)))
        .collect::<Result<Vec<_>>>()?;
    let roles: Vec<_> = (0..series.n_channels()).map(|c| series.role(c)).collect();
    let (mut input, layout) = ModelInput::<F>::encode(cfg, &norms, &roles, series.len())?;
    let last = series.len() - 1;

    let kf: Vec<usize> = series.known_future().iter().copied().collect();
    if !kf.is_empty() {
        let future = future.ok_or_else(|| {
            Error::InvalidArgument("future values of known-future channels are required".into())
        })?;
        if future.len() != kf.len() || future.iter().any(|f| f.len() < horizon) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} known-future rows of at least {horizon} steps",
                kf.len()
            )));
        }
        let normalized: Vec<Vec<f64>> = kf
            .iter()
            .zip(future)
            .map(|(&c, f)| {
                let a = norms[c].anchors[last];
                f[..horizon]
                    .iter()
                    .map(|&v| if v.is_finite() { (v - a.mean) / a.std } else { 0.0 })
                    .collect()
            })
            .collect();
        input.cov_sets.push(CovSet::from_channels(&normalized, cfg.patch_len, cfg.horizon_chunks()));
    }
    let cov = (!kf.is_empty()).then_some(0);

    let channels = series.forecast_channels();
    let n = layout.n_patches;
    let short = cfg.head_horizon_per_patch.min(horizon);
    for &c in &channels {
        if dense {
            for i in 0..n - 1 {
                input.queries.push(Query { channel: c, patch: i, steps: short, cov_set: None });
            }
        }
        input.queries.push(Query { channel: c, patch: n - 1, steps: horizon, cov_set: cov });
    }
    let (preds, _) = network::forward(cfg, params, &input);

    let patch_ends: Vec<usize> = (0..n).map(|i| layout.patch_end(i)).collect();
    let per_channel = if dense { n } else { 1 };
    let mut per_patch = Vec::new();
    let mut final_pred = Vec::new();
    let mut anchors = Vec::new();
    for (k, &c) in channels.iter().enumerate() {
        let rows = &preds[k * per_channel..(k + 1) * per_channel];
        let to64 = |v: &[F]| v.iter().map(|x| x.f64()).collect::<Vec<f64>>();
        let fin = to64(rows.last().expect("one query per channel"));
        if dense {
            let mut pp: Vec<Vec<f64>> = rows[..n - 1].iter().map(|r| to64(r)).collect();
            pp.push(fin[..short].to_vec());
            per_patch.push(pp);
        }
        final_pred.push(fin);
        anchors.push(patch_ends.iter().map(|&e| norms[c].anchors[e]).collect());
    }
    Ok(ForecastOutput { channels, horizon, patch_ends, per_patch, final_pred, anchors })
}
