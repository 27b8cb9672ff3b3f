//! Dense next-token training with Huber loss, per-batch horizon sampling and
//! coarse-grid loss masking, plus the test-at-the-end baseline objective.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, network, ChannelNorm, CovSet, ModelConfig, ModelInput, ModelParams, Query, Real, Tensor};
use crate::rng;
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Upper end of the sampled forecast horizon.
    pub max_horizon: usize,
    /// Context length of each training window.
    pub context_len: usize,
    pub coarse_grid_strides: Vec<usize>,
    pub coarse_grid_prob: f64,
    pub huber_delta: f64,
    pub steps: usize,
    pub seed: u64,
    pub loss_curve_path: Option<PathBuf>,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Context share of the window in test-at-the-end mode.
    pub test_at_end_prefix: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 4,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            grad_clip: Some(1.0),
            max_horizon: 960,
            context_len: 4096,
            coarse_grid_strides: vec![1, 2, 4, 8, 16, 32, 64, 128],
            coarse_grid_prob: 0.5,
            huber_delta: 1.0,
            steps: 1000,
            seed: 0,
            loss_curve_path: None,
            checkpoint_every: None,
            checkpoint_dir: None,
            test_at_end_prefix: 0.8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 || self.max_horizon == 0 || self.context_len == 0 {
            return fail("batch_size, max_horizon and context_len must be positive");
        }
        if self.coarse_grid_strides.is_empty()
            || self.coarse_grid_strides.iter().any(|&s| s == 0 || s > 128 || !s.is_power_of_two())
        {
            return fail("coarse_grid_strides must be powers of two in 1..=128");
        }
        if !(0.0..=1.0).contains(&self.coarse_grid_prob) {
            return fail("coarse_grid_prob must lie in [0, 1]");
        }
        if !(self.huber_delta > 0.0) || !(self.learning_rate >= 0.0) {
            return fail("huber_delta must be positive and learning_rate non-negative");
        }
        if !(self.test_at_end_prefix > 0.0 && self.test_at_end_prefix < 1.0) {
            return fail("test_at_end_prefix must lie in (0, 1)");
        }
        Ok(())
    }
}

pub fn huber(pred: f64, target: f64, delta: f64) -> f64 {
    let e = (pred - target).abs();
    if e <= delta {
        0.5 * e * e
    } else {
        delta * (e - 0.5 * delta)
    }
}

fn huber_grad(e: f64, delta: f64) -> f64 {
    e.clamp(-delta, delta)
}

/// Uniform horizon in `1..=max_horizon`.
pub fn sample_horizon(rng: &mut rng::Rng, max_horizon: usize) -> usize {
    rng.random_range(1..=max_horizon.max(1))
}

/// Which forecast steps enter the loss: steps below `horizon` congruent to
/// `phase` modulo `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossMask {
    pub horizon: usize,
    pub stride: usize,
    pub phase: usize,
}

impl LossMask {
    pub fn dense(horizon: usize) -> Self {
        Self { horizon, stride: 1, phase: 0 }
    }

    pub fn includes(&self, step: usize) -> bool {
        step < self.horizon && step % self.stride == self.phase
    }
}

/// Coarse mask with a uniformly sampled phase in `0..stride`.
pub fn coarse_grid_mask(horizon: usize, stride: usize, rng: &mut rng::Rng) -> LossMask {
    let stride = stride.max(1);
    LossMask { horizon, stride, phase: rng.random_range(0..stride) }
}

/// Flat mean Huber loss over included entries, and the number of entries.
pub fn batch_loss<F: Real>(
    preds: &[Vec<F>],
    targets: &[Vec<F>],
    include: &[Vec<bool>],
    delta: f64,
) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut count = 0usize;
    for ((p, t), m) in preds.iter().zip(targets).zip(include) {
        for ((&pv, &tv), &keep) in p.iter().zip(t).zip(m) {
            if keep {
                total += huber(pv.f64(), tv.f64(), delta);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoSupervisedPositions);
    }
    Ok((total / count as f64, count))
}

/// Gradient of `sum(huber) / norm` w.r.t. every prediction.
fn loss_grad<F: Real>(preds: &[Vec<F>], targets: &[Vec<F>], include: &[Vec<bool>], delta: f64, norm: f64) -> Vec<Vec<F>> {
    preds
        .iter()
        .zip(targets)
        .zip(include)
        .map(|((p, t), m)| {
            p.iter()
                .zip(t)
                .zip(m)
                .map(|((&pv, &tv), &keep)| {
                    if keep {
                        F::of(huber_grad(pv.f64() - tv.f64(), delta) / norm)
                    } else {
                        F::zero()
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Supervise every patch position with targets anchored at its own
    /// rolling statistics.
    DenseNextToken,
    /// Normalize on a fixed prefix and supervise only the suffix.
    TestAtEnd,
}

/// One supervised window: model input with per-query targets and inclusion.
#[derive(Debug, Clone)]
pub struct Example<F> {
    pub input: ModelInput<F>,
    pub targets: Vec<Vec<F>>,
    pub include: Vec<Vec<bool>>,
}

impl<F: Real> Example<F> {
    pub fn supervised(&self) -> usize {
        self.include.iter().map(|m| m.iter().filter(|&&b| b).count()).sum()
    }
}

/// Builds a dense next-token example from a window of `ctx + horizon` steps.
/// Interior positions predict `min(head_horizon_per_patch, horizon)` steps;
/// the final position predicts `horizon` steps. Positions whose anchor has no
/// observation or zero spread are skipped.
pub fn dense_example<F: Real>(
    cfg: &ModelConfig,
    window: &TimeSeries,
    ctx: usize,
    mask: LossMask,
) -> Result<Example<F>> {
    let horizon = mask.horizon;
    if ctx == 0 || ctx + horizon > window.len() {
        return Err(Error::HorizonTooLong { requested: horizon, max_feasible: window.len().saturating_sub(ctx.max(1)) });
    }
    if horizon > cfg.max_horizon {
        return Err(Error::HorizonTooLong { requested: horizon, max_feasible: cfg.max_horizon });
    }
    let norms = (0..window.n_channels())
        .map(|c| ChannelNorm::rolling(&window.channel(c)[..ctx + horizon], &window.channel_mask(c)[..ctx + horizon]))
        .collect::<Result<Vec<_>>>()?;
    let roles: Vec<_> = (0..window.n_channels()).map(|c| window.role(c)).collect();
    let (mut input, layout) = ModelInput::<F>::encode(cfg, &norms, &roles, ctx)?;
    let n = layout.n_patches;
    let kf: Vec<usize> = window.known_future().iter().copied().collect();
    let short = cfg.head_horizon_per_patch.min(horizon);
    let steps_at = |i: usize| if i + 1 == n { horizon } else { short };

    if !kf.is_empty() {
        for i in 0..n {
            let e = layout.patch_end(i);
            let future: Vec<Vec<f64>> = kf
                .iter()
                .map(|&c| {
                    let a = norms[c].anchors[e];
                    let (y, m) = (window.channel(c), window.channel_mask(c));
                    (e + 1..e + 1 + steps_at(i))
                        .map(|u| if m[u] { (y[u] - a.mean) / a.std } else { 0.0 })
                        .collect()
                })
                .collect();
            input.cov_sets.push(CovSet::from_channels(&future, cfg.patch_len, cfg.horizon_chunks()));
        }
    }

    let mut targets = Vec::new();
    let mut include = Vec::new();
    for c in window.forecast_channels() {
        let y = window.channel(c);
        for i in 0..n {
            let e = layout.patch_end(i);
            if !norms[c].anchor_valid(e) {
                continue;
            }
            let steps = steps_at(i);
            let (t, obs) = norms[c].targets(y, e, steps);
            let inc: Vec<bool> = obs.iter().enumerate().map(|(j, &o)| o && mask.includes(j)).collect();
            input.queries.push(Query { channel: c, patch: i, steps, cov_set: (!kf.is_empty()).then_some(i) });
            targets.push(t.into_iter().map(F::of).collect());
            include.push(inc);
        }
    }
    Ok(Example { input, targets, include })
}

/// Builds a test-at-the-end example: the first `prefix` steps are the
/// context, normalized with their own static statistics, and only the final
/// position is supervised on the remaining steps.
pub fn test_at_end_example<F: Real>(
    cfg: &ModelConfig,
    window: &TimeSeries,
    prefix: usize,
    mask: LossMask,
) -> Result<Example<F>> {
    let horizon = mask.horizon;
    if prefix == 0 || prefix + horizon > window.len() || horizon > cfg.max_horizon {
        return Err(Error::HorizonTooLong { requested: horizon, max_feasible: window.len().saturating_sub(prefix.max(1)) });
    }
    let len = prefix + horizon;
    let norms = (0..window.n_channels())
        .map(|c| ChannelNorm::fixed(&window.channel(c)[..len], &window.channel_mask(c)[..len], prefix))
        .collect::<Result<Vec<_>>>()?;
    let roles: Vec<_> = (0..window.n_channels()).map(|c| window.role(c)).collect();
    let (mut input, layout) = ModelInput::<F>::encode(cfg, &norms, &roles, prefix)?;
    let last = layout.n_patches - 1;
    let kf: Vec<usize> = window.known_future().iter().copied().collect();
    if !kf.is_empty() {
        let future: Vec<Vec<f64>> = kf
            .iter()
            .map(|&c| {
                let a = norms[c].anchors[0];
                let (y, m) = (window.channel(c), window.channel_mask(c));
                (prefix..len).map(|u| if m[u] { (y[u] - a.mean) / a.std } else { 0.0 }).collect()
            })
            .collect();
        input.cov_sets.push(CovSet::from_channels(&future, cfg.patch_len, cfg.horizon_chunks()));
    }
    let mut targets = Vec::new();
    let mut include = Vec::new();
    for c in window.forecast_channels() {
        if !norms[c].anchor_valid(prefix - 1) {
            continue;
        }
        let (t, obs) = norms[c].targets(window.channel(c), prefix - 1, horizon);
        include.push(obs.iter().enumerate().map(|(j, &o)| o && mask.includes(j)).collect());
        targets.push(t.into_iter().map(F::of).collect());
        input.queries.push(Query { channel: c, patch: last, steps: horizon, cov_set: (!kf.is_empty()).then_some(0) });
    }
    Ok(Example { input, targets, include })
}

/// Mean loss over a batch of examples and its parameter gradient.
pub fn loss_and_grad<F: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<F>,
    batch: &[Example<F>],
    delta: f64,
) -> Result<(f64, ModelParams<F>)> {
    let total: usize = batch.iter().map(|e| e.supervised()).sum();
    if total == 0 {
        return Err(Error::NoSupervisedPositions);
    }
    let mut grads = params.zeros_like();
    let mut sum = 0.0;
    for ex in batch {
        if ex.supervised() == 0 {
            continue;
        }
        let (preds, cache) = network::forward(cfg, params, &ex.input);
        let (mean, count) = batch_loss(&preds, &ex.targets, &ex.include, delta)?;
        sum += mean * count as f64;
        let dpreds = loss_grad(&preds, &ex.targets, &ex.include, delta, total as f64);
        network::backward(cfg, params, &ex.input, &cache, &dpreds, &mut grads);
    }
    Ok((sum / total as f64, grads))
}

/// Mean loss only (no backward pass).
pub fn batch_mean_loss<F: Real>(cfg: &ModelConfig, params: &ModelParams<F>, batch: &[Example<F>], delta: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut total = 0;
    for ex in batch {
        if ex.supervised() == 0 {
            continue;
        }
        let (preds, _) = network::forward(cfg, params, &ex.input);
        let (mean, count) = batch_loss(&preds, &ex.targets, &ex.include, delta)?;
        sum += mean * count as f64;
        total += count;
    }
    if total == 0 {
        return Err(Error::NoSupervisedPositions);
    }
    Ok(sum / total as f64)
}

/// Decoupled weight decay Adam. Decay applies to matrices only.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: ModelParams<f32>,
    v: ModelParams<f32>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl AdamW {
    pub fn new(params: &ModelParams<f32>, cfg: &TrainConfig) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams<f32>, grads: &ModelParams<f32>, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
        let moments = self.m.tensors_mut().into_iter().zip(self.v.tensors_mut());
        for (((_, p), (_, g)), ((_, m), (_, v))) in tensors.zip(moments) {
            let decay = if p.shape.len() >= 2 { self.weight_decay } else { 0.0 };
            update(p, g, m, v, b1, b2, bc1, bc2, lr, self.eps, decay);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update(
    p: &mut Tensor<f32>,
    g: &Tensor<f32>,
    m: &mut Tensor<f32>,
    v: &mut Tensor<f32>,
    b1: f32,
    b2: f32,
    bc1: f64,
    bc2: f64,
    lr: f64,
    eps: f64,
    decay: f64,
) {
    for (((pv, &gv), mv), vv) in p.data.iter_mut().zip(&g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
        *mv = b1 * *mv + (1.0 - b1) * gv;
        *vv = b2 * *vv + (1.0 - b2) * gv * gv;
        let mhat = *mv as f64 / bc1;
        let vhat = *vv as f64 / bc2;
        let delta = lr * (mhat / (vhat.sqrt() + eps) + decay * *pv as f64);
        *pv = (*pv as f64 - delta) as f32;
    }
}

/// Source of training series. Each call receives a fresh derived seed.
pub trait DataStream {
    fn sample(&mut self, seed: u64) -> Result<TimeSeries>;
}

impl<T: FnMut(u64) -> Result<TimeSeries>> DataStream for T {
    fn sample(&mut self, seed: u64) -> Result<TimeSeries> {
        self(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub wall_ms: u64,
    pub loss: f64,
    pub stride: usize,
    pub horizon: usize,
}

/// Single-owner training state; [`train`] drives it for `cfg.steps` steps.
pub struct Trainer<'a> {
    pub model_cfg: ModelConfig,
    pub cfg: TrainConfig,
    pub params: ModelParams<f32>,
    pub objective: Objective,
    opt: AdamW,
    step: usize,
    stream: &'a mut dyn DataStream,
    start: Instant,
}

impl<'a> Trainer<'a> {
    pub fn new(
        model_cfg: ModelConfig,
        params: ModelParams<f32>,
        cfg: TrainConfig,
        objective: Objective,
        stream: &'a mut dyn DataStream,
    ) -> Result<Self> {
        model_cfg.validate()?;
        cfg.validate()?;
        let opt = AdamW::new(&params, &cfg);
        Ok(Self { model_cfg, cfg, params, objective, opt, step: 0, stream, start: Instant::now() })
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Samples the horizon, loss mask and windows for the next step.
    pub fn next_batch(&mut self, batch_seed: u64) -> Result<(Vec<Example<f32>>, LossMask)> {
        let mut r = rng::seeded(batch_seed);
        let max_h = self.cfg.max_horizon.min(self.model_cfg.max_horizon);
        let mut batch = Vec::with_capacity(self.cfg.batch_size);
        let mut last_mask = LossMask::dense(1);
        for b in 0..self.cfg.batch_size {
            let series = self.stream.sample(rng::derive_seed(batch_seed, b as u64))?;
            let p = self.model_cfg.patch_len;
            if series.len() < p + 1 {
                continue;
            }
            let (ex, mask) = match self.objective {
                Objective::DenseNextToken => {
                    let h = sample_horizon(&mut r, max_h).min(series.len() - p);
                    let mask = self.sample_mask(h, &mut r);
                    let ctx = self.cfg.context_len.min(self.model_cfg.max_context).min(series.len() - h);
                    let start = r.random_range(0..=series.len() - ctx - h);
                    let window = series.slice(start, start + ctx + h)?;
                    (dense_example(&self.model_cfg, &window, ctx, mask)?, mask)
                }
                Objective::TestAtEnd => {
                    let h_dense = sample_horizon(&mut r, max_h).min(series.len() - p);
                    let ctx = self.cfg.context_len.min(self.model_cfg.max_context).min(series.len() - h_dense);
                    let len = ctx + h_dense;
                    let prefix = ((len as f64 * self.cfg.test_at_end_prefix).round() as usize).clamp(1, len - 1);
                    let h = (len - prefix).min(max_h);
                    let mask = self.sample_mask(h, &mut r);
                    let start = r.random_range(0..=series.len() - len);
                    let window = series.slice(start, start + prefix + h)?;
                    (test_at_end_example(&self.model_cfg, &window, prefix, mask)?, mask)
                }
            };
            last_mask = mask;
            batch.push(ex);
        }
        Ok((batch, last_mask))
    }

    fn sample_mask(&self, h: usize, r: &mut rng::Rng) -> LossMask {
        if r.random::<f64>() < self.cfg.coarse_grid_prob {
            let allowed: Vec<usize> = self.cfg.coarse_grid_strides.iter().copied().filter(|&s| s <= h).collect();
            if !allowed.is_empty() {
                let s = allowed[r.random_range(0..allowed.len())];
                return coarse_grid_mask(h, s, r);
            }
        }
        LossMask::dense(h)
    }

    /// Runs one optimizer step and returns its loss record.
    pub fn step(&mut self) -> Result<LossRecord> {
        let step = self.step + 1;
        let batch_seed = rng::derive_seed(self.cfg.seed, step as u64);
        let (batch, mask) = self.next_batch(batch_seed)?;
        let (loss, mut grads) = loss_and_grad(&self.model_cfg, &self.params, &batch, self.cfg.huber_delta)?;
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::NonFiniteLoss { step, batch_seed });
        }
        if let Some(clip) = self.cfg.grad_clip {
            let norm = grads.sq_norm().sqrt();
            if norm > clip {
                grads.scale((clip / norm) as f32);
            }
        }
        self.opt.step(&mut self.params, &grads, self.cfg.learning_rate);
        self.step = step;
        Ok(LossRecord {
            step,
            wall_ms: self.start.elapsed().as_millis() as u64,
            loss,
            stride: mask.stride,
            horizon: mask.horizon,
        })
    }
}

pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub curve: Vec<LossRecord>,
}

pub fn write_loss_curve(curve: &[LossRecord], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for rec in curve {
        w.serialize(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn run(
    model_cfg: &ModelConfig,
    params: ModelParams<f32>,
    stream: &mut dyn DataStream,
    cfg: &TrainConfig,
    objective: Objective,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(model_cfg.clone(), params, cfg.clone(), objective, stream)?;
    let mut curve = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let rec = trainer.step()?;
        curve.push(rec);
        if let (Some(every), Some(dir)) = (cfg.checkpoint_every, &cfg.checkpoint_dir) {
            if every > 0 && rec.step % every == 0 {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join(format!("step_{:06}.ckpt", rec.step));
                model::save_params(model_cfg, &trainer.params, &path)?;
            }
        }
    }
    if let Some(path) = &cfg.loss_curve_path {
        write_loss_curve(&curve, path)?;
    }
    Ok(TrainOutcome { params: trainer.params, curve })
}

/// Dense next-token training for `cfg.steps` steps.
pub fn train(
    model_cfg: &ModelConfig,
    params: ModelParams<f32>,
    stream: &mut dyn DataStream,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    run(model_cfg, params, stream, cfg, Objective::DenseNextToken)
}

/// Baseline objective: static prefix normalization, suffix-only loss.
pub fn train_test_at_end(
    model_cfg: &ModelConfig,
    params: ModelParams<f32>,
    stream: &mut dyn DataStream,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    run(model_cfg, params, stream, cfg, Objective::TestAtEnd)
}
