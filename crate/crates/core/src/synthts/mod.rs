//! Synthetic multivariate series: base generators, then rounds of expansion,
//! sparse mixing and post-transforms over a growing pool.

pub mod augment;
pub mod families;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{child, Rng};
use crate::series::{BaseUnit, FrequencyTag, TimeSeries};

pub use augment::{
    ar_filter, box_smooth, gaussian_smooth, mix, modulate, post_transform, relu_floor, shift, sparse_mix,
    univariate_expansions, Expansion, PostTransform, PostTransformWeights,
};
pub use families::{
    circular_reindex, registry, sample_base, sample_spec, BaseGeneratorSpec, Family, GeneratorParams, Sinusoid,
};

/// Batch-level settings shared by every series generated for one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenBatchParams {
    pub seq_len: usize,
    pub base_frequency: Option<FrequencyTag>,
    pub time_index: Option<Vec<i64>>,
    /// `(period, weight)` pairs.
    pub compatible_periods: Vec<(usize, f64)>,
    pub noise_level: f64,
    pub rounds: usize,
}

impl GenBatchParams {
    pub fn sample_period(&self, rng: &mut Rng) -> usize {
        let total: f64 = self.compatible_periods.iter().map(|p| p.1).sum();
        if self.compatible_periods.is_empty() || total <= 0.0 {
            return (self.seq_len / 8).max(3);
        }
        let mut u = rng.random_range(0.0..total);
        for &(p, w) in &self.compatible_periods {
            if u < w {
                return p;
            }
            u -= w;
        }
        self.compatible_periods.last().expect("nonempty").0
    }

    pub fn weight_of(&self, period: usize) -> Option<f64> {
        self.compatible_periods.iter().find(|p| p.0 == period).map(|p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchParamConfig {
    pub seq_len: usize,
    pub p_no_index: f64,
    pub rounds_range: [usize; 2],
    pub noise_level_range: [f64; 2],
    pub natural_weight: f64,
    pub n_generic_periods: usize,
    /// Longest period as a fraction of `seq_len`.
    pub max_period_fraction: f64,
    pub min_period: usize,
    /// Restricts base frequencies; empty means all units.
    pub base_units: Vec<BaseUnit>,
    pub multipliers: Vec<u32>,
}

impl Default for BatchParamConfig {
    fn default() -> Self {
        Self {
            seq_len: 1024,
            p_no_index: 0.2,
            rounds_range: [2, 5],
            noise_level_range: [0.0, 0.3],
            natural_weight: 8.0,
            n_generic_periods: 6,
            max_period_fraction: 0.25,
            min_period: 3,
            base_units: Vec::new(),
            multipliers: vec![1, 1, 1, 2, 5, 15],
        }
    }
}

impl BatchParamConfig {
    pub fn validate(&self) -> Result<()> {
        let [r0, r1] = self.rounds_range;
        if !(2..=5).contains(&r0) || !(r0..=5).contains(&r1) {
            return Err(Error::Config("rounds_range must lie within [2, 5]".into()));
        }
        if self.seq_len < 8 {
            return Err(Error::Config("seq_len must be at least 8".into()));
        }
        if !(0.0..=1.0).contains(&self.p_no_index) {
            return Err(Error::Config("p_no_index must lie in [0, 1]".into()));
        }
        let [n0, n1] = self.noise_level_range;
        if n0 < 0.0 || n1 < n0 {
            return Err(Error::Config("noise_level_range must be an ordered nonnegative pair".into()));
        }
        if self.multipliers.is_empty() || self.multipliers.contains(&0) {
            return Err(Error::Config("multipliers must be nonempty and positive".into()));
        }
        Ok(())
    }
}

const EPOCH_2000: i64 = 946_684_800;

/// Draws frequency, start time, compatible periods, noise level and round
/// count for one batch.
pub fn sample_batch_params(rng: &mut Rng, cfg: &BatchParamConfig) -> GenBatchParams {
    let units: &[BaseUnit] = if cfg.base_units.is_empty() { &BaseUnit::ALL } else { &cfg.base_units };
    let unit = units[rng.random_range(0..units.len())];
    let mult = cfg.multipliers[rng.random_range(0..cfg.multipliers.len())];
    let freq = FrequencyTag { base_unit: unit, multiplier: mult };
    let with_index = !rng.random_bool(cfg.p_no_index);
    batch_params_for(with_index.then_some(freq), rng, cfg)
}

/// Like `sample_batch_params` with the frequency fixed. `None` gives pure
/// sequence data without timestamps.
pub fn batch_params_for(freq: Option<FrequencyTag>, rng: &mut Rng, cfg: &BatchParamConfig) -> GenBatchParams {
    let len = cfg.seq_len;
    let max_p = ((len as f64 * cfg.max_period_fraction) as usize).max(cfg.min_period);
    let mut periods: Vec<(usize, f64)> = freq
        .map(|f| f.natural_periods())
        .unwrap_or_default()
        .into_iter()
        .filter(|&p| p >= cfg.min_period && p <= max_p)
        .map(|p| (p, cfg.natural_weight))
        .collect();
    let want = periods.len() + cfg.n_generic_periods;
    let mut tries = 0;
    while periods.len() < want && tries < 100 * cfg.n_generic_periods {
        tries += 1;
        let p = rng.random_range(cfg.min_period..=max_p);
        if periods.iter().all(|q| q.0 != p) {
            periods.push((p, 1.0));
        }
    }
    let time_index = freq.map(|f| {
        let step = f.step_seconds();
        let span = 25 * 365 * 86_400 / step;
        let start = EPOCH_2000 + rng.random_range(0..span) * step;
        (0..len as i64).map(|t| start + t * step).collect()
    });
    let [n0, n1] = cfg.noise_level_range;
    let [r0, r1] = cfg.rounds_range;
    GenBatchParams {
        seq_len: len,
        base_frequency: freq,
        time_index,
        compatible_periods: periods,
        noise_level: if n1 > n0 { rng.random_range(n0..n1) } else { n0 },
        rounds: rng.random_range(r0..=r1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    pub n_base_range: [usize; 2],
    pub n_expansions_range: [usize; 2],
    pub mix_sparsity: usize,
    pub pool_subsample: usize,
    pub post_transform_weights: PostTransformWeights,
    pub real_mix_fraction: f64,
    /// Relative weight per family; missing families get weight 1.
    pub family_weights: BTreeMap<Family, f64>,
    pub missing_rate_range: [f64; 2],
    pub outlier_rate: f64,
    pub spike_rate: f64,
    /// Adds sine/cosine phase channels of the dominant calendar period as
    /// known-future covariates when a time index exists.
    pub calendar_features: bool,
    /// Keeps a random subset of at most this many generated channels.
    pub max_channels: Option<usize>,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            n_base_range: [2, 4],
            n_expansions_range: [1, 5],
            mix_sparsity: 2,
            pool_subsample: 8,
            post_transform_weights: PostTransformWeights::default(),
            real_mix_fraction: 0.0,
            family_weights: BTreeMap::new(),
            missing_rate_range: [0.01, 0.1],
            outlier_rate: 0.005,
            spike_rate: 0.005,
            calendar_features: true,
            max_channels: None,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let [e0, e1] = self.n_expansions_range;
        if e0 < 1 || e1 > 5 || e0 > e1 {
            return Err(Error::Config("n_expansions_range must lie within [1, 5]".into()));
        }
        if self.n_base_range[0] < 1 || self.n_base_range[0] > self.n_base_range[1] {
            return Err(Error::Config("n_base_range must be an ordered pair >= 1".into()));
        }
        if self.mix_sparsity < 1 {
            return Err(Error::Config("mix_sparsity must be >= 1".into()));
        }
        if self.pool_subsample < 1 {
            return Err(Error::Config("pool_subsample must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.real_mix_fraction) {
            return Err(Error::Config("real_mix_fraction must lie in [0, 1]".into()));
        }
        if self.family_weights.values().any(|w| !(*w >= 0.0)) || self.family_weights(&Family::ALL).iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("family weights must be nonnegative with a positive total".into()));
        }
        let w = self.post_transform_weights.entries();
        if w.iter().any(|e| !(e.1 >= 0.0)) || w.iter().map(|e| e.1).sum::<f64>() <= 0.0 {
            return Err(Error::Config("post-transform weights must be nonnegative with a positive total".into()));
        }
        if self.max_channels == Some(0) {
            return Err(Error::Config("max_channels must be >= 1".into()));
        }
        Ok(())
    }

    fn family_weights(&self, fams: &[Family]) -> Vec<f64> {
        fams.iter().map(|f| self.family_weights.get(f).copied().unwrap_or(1.0)).collect()
    }

    /// Weights that favour the periodic families four to one.
    pub fn periodic_weighted() -> BTreeMap<Family, f64> {
        Family::ALL.iter().map(|&f| (f, if f.is_periodic() { 4.0 } else { 1.0 })).collect()
    }

    pub fn sample_family(&self, rng: &mut Rng) -> Family {
        let w = self.family_weights(&Family::ALL);
        let mut u = rng.random_range(0.0..w.iter().sum::<f64>());
        for (f, w) in Family::ALL.iter().zip(w) {
            if u < w {
                return *f;
            }
            u -= w;
        }
        Family::ALL[0]
    }
}

/// Pool size after `rounds` rounds starting from `initial` series.
pub fn pool_size_after(initial: usize, rounds: usize, subsample: usize) -> usize {
    (0..rounds).fold(initial, |p, _| p + subsample.min(p))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelSource {
    Base(Family),
    Real,
    Derived { round: usize },
    Calendar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub series: TimeSeries,
    pub sources: Vec<ChannelSource>,
    /// Real series dropped for a frequency or length mismatch.
    pub skipped_real: usize,
}

fn calendar_channels(params: &GenBatchParams) -> Option<(usize, Vec<f64>, Vec<f64>)> {
    let freq = params.base_frequency?;
    let ts = params.time_index.as_ref()?;
    let p = freq.dominant_period();
    if p < 2 {
        return None;
    }
    let step = freq.step_seconds();
    let phase = |t: i64| 2.0 * PI * (t.div_euclid(step).rem_euclid(p as i64)) as f64 / p as f64;
    Some((p, ts.iter().map(|&t| phase(t).sin()).collect(), ts.iter().map(|&t| phase(t).cos()).collect()))
}

/// Builds one multivariate series. A pure function of its arguments.
pub fn generate(cfg: &AugmentationConfig, params: &GenBatchParams, real_pool: &[TimeSeries], seed: u64) -> Result<Generated> {
    cfg.validate()?;
    if params.seq_len < 8 {
        return Err(Error::InvalidArgument(format!("seq_len {} < 8", params.seq_len)));
    }
    let len = params.seq_len;
    let mut rng = child(seed, 0);
    let n_base = rng.random_range(cfg.n_base_range[0]..=cfg.n_base_range[1]);

    let mut pool: Vec<Vec<f64>> = Vec::new();
    let mut sources = Vec::new();
    for i in 0..n_base {
        let mut r = child(seed, 1000 + i as u64);
        let family = cfg.sample_family(&mut r);
        let spec = sample_spec(family, params, &mut r);
        pool.push(sample_base(&spec, params, &mut r)?);
        sources.push(ChannelSource::Base(family));
    }

    let mut skipped_real = 0;
    let n_real = (cfg.real_mix_fraction * n_base as f64).round() as usize;
    if !real_pool.is_empty() {
        for _ in 0..n_real {
            let s = &real_pool[rng.random_range(0..real_pool.len())];
            let freq_ok = match (s.frequency(), params.base_frequency) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            };
            if !freq_ok || s.len() < len {
                skipped_real += 1;
                continue;
            }
            let chans = s.forecast_channels();
            let c = chans[rng.random_range(0..chans.len())];
            let start = rng.random_range(0..=s.len() - len);
            let vals = &s.channel(c)[start..start + len];
            let mask = &s.channel_mask(c)[start..start + len];
            pool.push(vals.iter().zip(mask).map(|(&v, &m)| if m { v } else { f64::NAN }).collect());
            sources.push(ChannelSource::Real);
        }
    }

    for round in 0..params.rounds {
        let mut r = child(seed, 2000 + round as u64);
        let m = cfg.pool_subsample.min(pool.len());
        let picked = rand::seq::index::sample(&mut r, pool.len(), m);
        let mut expansions = Vec::new();
        for i in picked {
            let x = augment::forward_fill(&pool[i]);
            expansions.extend(univariate_expansions(&x, &mut r, cfg));
        }
        let mixed = sparse_mix(&expansions, m, &mut r, cfg, params.noise_level);
        for x in &mixed {
            let partner = &expansions[r.random_range(0..expansions.len())];
            pool.push(post_transform(x, Some(partner), &mut r, cfg));
            sources.push(ChannelSource::Derived { round: round + 1 });
        }
    }

    let mut keep: Vec<usize> = (0..pool.len()).collect();
    if let Some(cap) = cfg.max_channels {
        if cap < pool.len() {
            keep = rand::seq::index::sample(&mut rng, pool.len(), cap).into_vec();
            keep.sort_unstable();
        }
    }
    let mut values: Vec<Vec<f64>> = keep.iter().map(|&i| std::mem::take(&mut pool[i])).collect();
    let mut sources: Vec<ChannelSource> = keep.iter().map(|&i| sources[i].clone()).collect();
    let mut names: Vec<String> = (0..values.len()).map(|i| format!("ch{i}")).collect();
    let target = rng.random_range(0..values.len());
    let mut kf = Vec::new();
    if cfg.calendar_features {
        if let Some((p, s, c)) = calendar_channels(params) {
            for (tag, v) in [("sin", s), ("cos", c)] {
                kf.push(values.len());
                values.push(v);
                names.push(format!("cal_{tag}_{p}"));
                sources.push(ChannelSource::Calendar);
            }
        }
    }
    let series = TimeSeries::new(values)?
        .with_names(names)?
        .with_target(target)?
        .with_known_future(kf)?
        .with_frequency(params.base_frequency)
        .with_time_index(params.time_index.clone())?;
    Ok(Generated { series, sources, skipped_real })
}
