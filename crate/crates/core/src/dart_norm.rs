//! Causal rolling normalization with drift features.
//!
//! Every statistic at step `t` is computed from observations at steps `<= t`
//! only: the rolling mean `m_t` and population std `s_t` standardize the
//! series, while the mean drift `d_t` and log-std drift `r_t` expose how the
//! statistics moved. Forecast targets are expressed relative to the
//! statistics at the forecast origin, which makes dense next-step supervision
//! leak-free.

use crate::error::{Error, Result};

/// Lower clamp applied to the rolling std before dividing.
pub const EPS_STD: f64 = 1e-8;
/// Symmetric clip on drift features.
pub const DRIFT_CLIP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RollingStats {
    pub m: Vec<f64>,
    pub s: Vec<f64>,
    pub s_clamped: Vec<f64>,
    /// Observed points in `0..=t`.
    pub count: Vec<u64>,
}

impl RollingStats {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn anchor(&self, t: usize) -> AnchorStats {
        AnchorStats { mean: self.m[t], std: self.s_clamped[t] }
    }
}

/// Statistics at a forecast origin, used to (de)normalize targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorStats {
    pub mean: f64,
    /// Clamped std.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedView {
    pub x: Vec<f64>,
    pub d: Vec<f64>,
    pub r: Vec<f64>,
    pub mask: Vec<bool>,
    pub stats: RollingStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredTargets {
    pub anchor_index: usize,
    pub anchor: AnchorStats,
    pub targets: Vec<f64>,
    /// False where the target is missing and must be excluded from the loss.
    pub observed: Vec<bool>,
}

fn check_lengths(y: &[f64], mask: &[bool]) -> Result<()> {
    if y.len() != mask.len() {
        return Err(Error::ShapeMismatch(format!(
            "values have length {}, mask has length {}",
            y.len(),
            mask.len()
        )));
    }
    Ok(())
}

/// Rolling mean and population std over observed points of `y[0..=t]`.
/// Statistics carry forward across missing points; before the first
/// observation they are zero.
pub fn rolling_stats(y: &[f64], mask: &[bool]) -> Result<RollingStats> {
    check_lengths(y, mask)?;
    if !mask.iter().any(|&m| m) {
        return Err(Error::NoObservations);
    }
    let n = y.len();
    let mut stats = RollingStats {
        m: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        s_clamped: Vec::with_capacity(n),
        count: Vec::with_capacity(n),
    };
    let (mut count, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for (&v, &obs) in y.iter().zip(mask) {
        if obs {
            count += 1;
            let delta = v - mean;
            mean += delta / count as f64;
            m2 += delta * (v - mean);
        }
        let s = if count > 0 { (m2.max(0.0) / count as f64).sqrt() } else { 0.0 };
        stats.m.push(mean);
        stats.s.push(s);
        stats.s_clamped.push(s.max(EPS_STD));
        stats.count.push(count);
    }
    Ok(stats)
}

fn drift(m: f64, s_clamped: f64, prev_m: f64, prev_s: f64, prev_s_clamped: f64) -> (f64, f64) {
    if prev_s <= EPS_STD {
        return (0.0, 0.0);
    }
    let d = (m - prev_m) / prev_s_clamped;
    let r = (s_clamped / prev_s_clamped).ln();
    (d.clamp(-DRIFT_CLIP, DRIFT_CLIP), r.clamp(-DRIFT_CLIP, DRIFT_CLIP))
}

pub fn normalize(y: &[f64], mask: &[bool]) -> Result<NormalizedView> {
    let stats = rolling_stats(y, mask)?;
    let n = y.len();
    let mut x = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for t in 0..n {
        x.push(if mask[t] { (y[t] - stats.m[t]) / stats.s_clamped[t] } else { 0.0 });
        let (dt, rt) = if t == 0 {
            (0.0, 0.0)
        } else {
            drift(stats.m[t], stats.s_clamped[t], stats.m[t - 1], stats.s[t - 1], stats.s_clamped[t - 1])
        };
        d.push(dt);
        r.push(rt);
    }
    Ok(NormalizedView { x, d, r, mask: mask.to_vec(), stats })
}

/// Targets `(y[T+1..=T+h] - m_T) / s_T` anchored at index `anchor`.
pub fn anchored_targets(y: &[f64], mask: &[bool], anchor: usize, horizon: usize) -> Result<AnchoredTargets> {
    check_lengths(y, mask)?;
    if anchor >= y.len() || anchor + horizon >= y.len() {
        return Err(Error::HorizonTooLong {
            requested: horizon,
            max_feasible: y.len().saturating_sub(anchor + 1),
        });
    }
    let stats = rolling_stats(&y[..=anchor], &mask[..=anchor])?;
    let a = stats.anchor(anchor);
    Ok(targets_from_anchor(y, mask, anchor, horizon, a))
}

pub(crate) fn targets_from_anchor(
    y: &[f64],
    mask: &[bool],
    anchor: usize,
    horizon: usize,
    a: AnchorStats,
) -> AnchoredTargets {
    let range = anchor + 1..anchor + 1 + horizon;
    let targets = y[range.clone()]
        .iter()
        .zip(&mask[range.clone()])
        .map(|(&v, &obs)| if obs { (v - a.mean) / a.std } else { 0.0 })
        .collect();
    AnchoredTargets { anchor_index: anchor, anchor: a, targets, observed: mask[range].to_vec() }
}

pub fn denormalize(pred: &[f64], anchor: AnchorStats) -> Vec<f64> {
    pred.iter().map(|&p| p * anchor.std + anchor.mean).collect()
}

/// Streaming form of [`normalize`]: feed one point at a time.
#[derive(Debug, Clone, Default)]
pub struct OnlineNormalizer {
    count: u64,
    mean: f64,
    m2: f64,
    steps: u64,
    prev: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineStep {
    pub x: f64,
    pub d: f64,
    pub r: f64,
    pub anchor: AnchorStats,
}

impl OnlineNormalizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resumes from batch statistics at the last step of `stats`.
    pub fn from_stats(stats: &RollingStats) -> Option<Self> {
        let t = stats.len().checked_sub(1)?;
        let count = stats.count[t];
        Some(Self {
            count,
            mean: stats.m[t],
            m2: stats.s[t] * stats.s[t] * count as f64,
            steps: stats.len() as u64,
            prev: Some((stats.m[t], stats.s[t])),
        })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, y: f64, observed: bool) -> OnlineStep {
        if observed {
            self.count += 1;
            let delta = y - self.mean;
            self.mean += delta / self.count as f64;
            self.m2 += delta * (y - self.mean);
        }
        let s = if self.count > 0 { (self.m2.max(0.0) / self.count as f64).sqrt() } else { 0.0 };
        let s_clamped = s.max(EPS_STD);
        let (d, r) = match (self.steps, self.prev) {
            (0, _) | (_, None) => (0.0, 0.0),
            (_, Some((pm, ps))) => drift(self.mean, s_clamped, pm, ps, ps.max(EPS_STD)),
        };
        let x = if observed { (y - self.mean) / s_clamped } else { 0.0 };
        self.prev = Some((self.mean, s));
        self.steps += 1;
        OnlineStep { x, d, r, anchor: AnchorStats { mean: self.mean, std: s_clamped } }
    }
}
