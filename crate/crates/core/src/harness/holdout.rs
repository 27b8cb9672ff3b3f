//! Held-out synthetic evaluation tasks.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EvalTask;
use crate::error::Result;
use crate::rng;
use crate::series::{BaseUnit, FrequencyTag, TimeSeries};
use crate::synthts::augment::std_dev;
use crate::synthts::{batch_params_for, sample_base, sample_spec, BatchParamConfig, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HoldoutKind {
    /// Periodic families only; the season is the generator's period.
    Seasonal,
    /// Every family; the season is the generator period when there is one,
    /// else the calendar period of the frequency, else 1.
    Mixed,
}

/// `n` univariate tasks of `context + horizon` steps with observation noise of
/// 5-30% of the clean signal's std.
pub fn holdout_tasks(kind: HoldoutKind, n: usize, context: usize, horizon: usize, seed: u64) -> Result<Vec<EvalTask>> {
    let len = context + horizon;
    let bcfg = BatchParamConfig {
        seq_len: len,
        max_period_fraction: (context as f64 / 4.0) / len as f64,
        ..Default::default()
    };
    let families: Vec<Family> = match kind {
        HoldoutKind::Seasonal => Family::ALL.into_iter().filter(|f| f.is_periodic()).collect(),
        HoldoutKind::Mixed => Family::ALL.to_vec(),
    };
    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng::child(seed, i as u64);
        let unit = [BaseUnit::Hour, BaseUnit::Day, BaseUnit::Minute, BaseUnit::Month][r.random_range(0..4)];
        let freq = FrequencyTag { base_unit: unit, multiplier: 1 };
        let params = batch_params_for(Some(freq), &mut r, &bcfg);
        let family = families[r.random_range(0..families.len())];
        let spec = sample_spec(family, &params, &mut r);
        let mut x = sample_base(&spec, &params, &mut r)?;
        let sd = std_dev(&x[..context]);
        if sd > 0.0 {
            let noise = Normal::new(0.0, r.random_range(0.05..0.3) * sd).expect("finite std");
            for v in &mut x {
                *v += noise.sample(&mut r);
            }
        }
        let season = spec
            .period()
            .map(|p| p.round() as usize)
            .or_else(|| Some(freq.dominant_period()).filter(|&p| p <= context))
            .unwrap_or(1)
            .max(1);
        let name = match kind {
            HoldoutKind::Seasonal => "seasonal",
            HoldoutKind::Mixed => "mixed",
        };
        let ds = TimeSeries::univariate(x)?
            .with_frequency(Some(freq))
            .with_names(vec![format!("{family}")])?;
        tasks.push(EvalTask::new(format!("{name}_{i:03}"), ds, context, horizon, Some(season))?);
    }
    Ok(tasks)
}
