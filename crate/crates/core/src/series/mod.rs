//! Multivariate time series data model shared by every other module.
//!
//! Values are stored channel-major as `(n_channels, T)` float64 rows. Missing
//! observations are carried in a boolean mask (`true` = observed) rather than
//! as sentinel values.

mod frequency;
pub mod io;
mod naive;
mod patch;
mod strided;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use frequency::{BaseUnit, FrequencyTag};
pub use naive::{seasonal_naive, NaiveForecast};
pub use patch::{patchify, unpatchify, Patched};
pub use strided::{strided_views, StridedView};

/// Role a channel plays in forecasting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    Target,
    Covariate,
    KnownFuture,
}

impl ChannelRole {
    pub fn index(self) -> usize {
        match self {
            ChannelRole::Target => 0,
            ChannelRole::Covariate => 1,
            ChannelRole::KnownFuture => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
    time_index: Option<Vec<i64>>,
    frequency: Option<FrequencyTag>,
    target_channel: usize,
    known_future: BTreeSet<usize>,
    names: Vec<String>,
}

impl TimeSeries {
    /// Builds a series from channel rows. Non-finite values are marked missing.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let mask = values
            .iter()
            .map(|row| row.iter().map(|v| v.is_finite()).collect())
            .collect();
        Self::with_mask(values, mask)
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::new(vec![values])
    }

    pub fn with_mask(values: Vec<Vec<f64>>, mask: Vec<Vec<bool>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSeries("series has no channels".into()));
        }
        let len = values[0].len();
        if values.iter().any(|row| row.len() != len) {
            return Err(Error::InvalidSeries("channels have different lengths".into()));
        }
        if mask.len() != values.len() || mask.iter().any(|row| row.len() != len) {
            return Err(Error::InvalidSeries(
                "values and missing_mask have different shapes".into(),
            ));
        }
        let names = (0..values.len()).map(|c| format!("ch{c}")).collect();
        Ok(Self {
            values,
            mask,
            time_index: None,
            frequency: None,
            target_channel: 0,
            known_future: BTreeSet::new(),
            names,
        })
    }

    pub fn with_target(mut self, channel: usize) -> Result<Self> {
        if channel >= self.n_channels() {
            return Err(Error::InvalidSeries(format!(
                "target channel {channel} out of range for {} channels",
                self.n_channels()
            )));
        }
        if self.known_future.contains(&channel) {
            return Err(Error::InvalidSeries(
                "target channel cannot be a known-future channel".into(),
            ));
        }
        self.target_channel = channel;
        Ok(self)
    }

    pub fn with_known_future(mut self, channels: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = channels.into_iter().collect();
        if set.contains(&self.target_channel) {
            return Err(Error::InvalidSeries(
                "target channel cannot be a known-future channel".into(),
            ));
        }
        if let Some(&c) = set.iter().find(|&&c| c >= self.n_channels()) {
            return Err(Error::InvalidSeries(format!("known-future channel {c} out of range")));
        }
        self.known_future = set;
        Ok(self)
    }

    pub fn with_frequency(mut self, frequency: Option<FrequencyTag>) -> Self {
        self.frequency = frequency;
        self
    }

    /// Attaches timestamps (epoch seconds). Spacing must be constant and positive.
    pub fn with_time_index(mut self, index: Option<Vec<i64>>) -> Result<Self> {
        if let Some(ts) = &index {
            if ts.len() != self.len() {
                return Err(Error::InvalidSeries(format!(
                    "time index has {} entries for a series of length {}",
                    ts.len(),
                    self.len()
                )));
            }
            check_uniform(ts)?;
        }
        self.time_index = index;
        Ok(self)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_channels() {
            return Err(Error::InvalidSeries("one name per channel required".into()));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n_channels(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    pub fn mask(&self) -> &[Vec<bool>] {
        &self.mask
    }

    pub fn channel_mask(&self, c: usize) -> &[bool] {
        &self.mask[c]
    }

    pub fn time_index(&self) -> Option<&[i64]> {
        self.time_index.as_deref()
    }

    pub fn frequency(&self) -> Option<FrequencyTag> {
        self.frequency
    }

    pub fn target_channel(&self) -> usize {
        self.target_channel
    }

    pub fn known_future(&self) -> &BTreeSet<usize> {
        &self.known_future
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn role(&self, c: usize) -> ChannelRole {
        if c == self.target_channel {
            ChannelRole::Target
        } else if self.known_future.contains(&c) {
            ChannelRole::KnownFuture
        } else {
            ChannelRole::Covariate
        }
    }

    /// Channels that get forecast: everything except known-future covariates.
    pub fn forecast_channels(&self) -> Vec<usize> {
        (0..self.n_channels()).filter(|c| !self.known_future.contains(c)).collect()
    }

    /// Returns a copy restricted to `start..end` along time.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{end} out of range for length {}",
                self.len()
            )));
        }
        Ok(Self {
            values: self.values.iter().map(|r| r[start..end].to_vec()).collect(),
            mask: self.mask.iter().map(|r| r[start..end].to_vec()).collect(),
            time_index: self.time_index.as_ref().map(|t| t[start..end].to_vec()),
            frequency: self.frequency,
            target_channel: self.target_channel,
            known_future: self.known_future.clone(),
            names: self.names.clone(),
        })
    }

    /// Keeps the most recent `len` steps.
    pub fn tail(&self, len: usize) -> Result<Self> {
        let n = self.len();
        if len >= n {
            return Ok(self.clone());
        }
        self.slice(n - len, n)
    }

    /// Applies `f` to every value, leaving masks, roles and time index untouched.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(c, row)| row.iter().enumerate().map(|(t, &v)| f(c, t, v)).collect())
            .collect();
        Self { values, ..self.clone() }
    }

    /// Appends a covariate channel.
    pub fn push_channel(&mut self, name: String, values: Vec<f64>, mask: Vec<bool>) -> Result<()> {
        if values.len() != self.len() || mask.len() != self.len() {
            return Err(Error::InvalidSeries("appended channel has the wrong length".into()));
        }
        self.values.push(values);
        self.mask.push(mask);
        self.names.push(name);
        Ok(())
    }

    /// Reorders channels; roles follow their channels.
    pub fn permute_channels(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_channels();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&c| c >= n || std::mem::replace(&mut seen[c], true)) {
            return Err(Error::InvalidArgument("order is not a permutation".into()));
        }
        let position = |old: usize| order.iter().position(|&c| c == old).unwrap();
        Ok(Self {
            values: order.iter().map(|&c| self.values[c].clone()).collect(),
            mask: order.iter().map(|&c| self.mask[c].clone()).collect(),
            names: order.iter().map(|&c| self.names[c].clone()).collect(),
            time_index: self.time_index.clone(),
            frequency: self.frequency,
            target_channel: position(self.target_channel),
            known_future: self.known_future.iter().map(|&c| position(c)).collect(),
        })
    }

    /// Population standard deviation of the observed points of channel `c`.
    pub fn channel_std(&self, c: usize) -> f64 {
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for (&v, &obs) in self.values[c].iter().zip(&self.mask[c]) {
            if obs {
                n += 1.0;
                let delta = v - mean;
                mean += delta / n;
                m2 += delta * (v - mean);
            }
        }
        if n > 0.0 {
            (m2 / n).sqrt()
        } else {
            0.0
        }
    }
}

pub(crate) fn check_uniform(ts: &[i64]) -> Result<()> {
    if ts.len() < 2 {
        return Ok(());
    }
    let step = ts[1] - ts[0];
    if step <= 0 {
        return Err(Error::IrregularTimeIndex);
    }
    if ts.windows(2).any(|w| w[1] - w[0] != step) {
        return Err(Error::IrregularTimeIndex);
    }
    Ok(())
}
