use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::real::Real;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![F::zero(); n] }
    }

    pub fn filled(shape: &[usize], v: F) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![v; n] }
    }

    pub fn normal(shape: &[usize], std: f64, rng: &mut rng::Rng) -> Self {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0, std).expect("finite std");
        Self { shape: shape.to_vec(), data: (0..n).map(|_| F::of(dist.sample(rng))).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| G::of(v.f64())).collect() }
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = F::zero());
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[F] {
        let w = self.shape[1];
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        let w = self.shape[1];
        &mut self.data[i * w..(i + 1) * w]
    }
}

/// One encoder block: attention and SwiGLU feed-forward with RMSNorm gains.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub attn_norm: Tensor<F>,
    pub wq: Tensor<F>,
    pub wk: Tensor<F>,
    pub wv: Tensor<F>,
    pub wo: Tensor<F>,
    pub ffn_norm: Tensor<F>,
    /// `(ffn_dim, hidden)` gate projection.
    pub w1: Tensor<F>,
    pub b: Tensor<F>,
    /// `(hidden, ffn_dim)` projection applied after the swish.
    pub w3: Tensor<F>,
    /// `(hidden, hidden)` linear branch.
    pub w2: Tensor<F>,
    pub c: Tensor<F>,
    /// Swish slope, shape `[1]`.
    pub beta: Tensor<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    /// `(hidden, 3 * patch_len)`: slot `j` uses columns `j`, `P + j`, `2P + j`.
    pub patch_embed_w: Tensor<F>,
    pub patch_embed_b: Tensor<F>,
    pub missing_embed: Tensor<F>,
    pub pad_tokens: Tensor<F>,
    pub role_embed: Tensor<F>,
    pub layers: Vec<LayerParams<F>>,
    pub final_norm: Tensor<F>,
    pub head_down: Tensor<F>,
    pub head_up: Tensor<F>,
    pub head_bias: Tensor<F>,
    pub cross_embed_w: Tensor<F>,
    pub cross_embed_b: Tensor<F>,
    pub cross_chunk_pos: Tensor<F>,
    pub cross_wq: Tensor<F>,
    pub cross_wk: Tensor<F>,
    pub cross_wv: Tensor<F>,
    pub cross_null_k: Tensor<F>,
    pub cross_null_v: Tensor<F>,
    pub cross_wo: Tensor<F>,
    pub cross_bias: Tensor<F>,
}

macro_rules! named_tensors {
    ($s:expr $(, $m:tt)?) => {{
        let s = $s;
        let mut out = Vec::with_capacity(24 + 12 * s.layers.len());
        out.push(("patch_embed.weight".to_string(), & $($m)? s.patch_embed_w));
        out.push(("patch_embed.bias".to_string(), & $($m)? s.patch_embed_b));
        out.push(("missing_embed".to_string(), & $($m)? s.missing_embed));
        out.push(("pad_tokens".to_string(), & $($m)? s.pad_tokens));
        out.push(("role_embed".to_string(), & $($m)? s.role_embed));
        for (i, l) in (& $($m)? s.layers).into_iter().enumerate() {
            out.push((format!("layers.{i}.attn_norm"), & $($m)? l.attn_norm));
            out.push((format!("layers.{i}.attn.wq"), & $($m)? l.wq));
            out.push((format!("layers.{i}.attn.wk"), & $($m)? l.wk));
            out.push((format!("layers.{i}.attn.wv"), & $($m)? l.wv));
            out.push((format!("layers.{i}.attn.wo"), & $($m)? l.wo));
            out.push((format!("layers.{i}.ffn_norm"), & $($m)? l.ffn_norm));
            out.push((format!("layers.{i}.ffn.w1"), & $($m)? l.w1));
            out.push((format!("layers.{i}.ffn.b"), & $($m)? l.b));
            out.push((format!("layers.{i}.ffn.w3"), & $($m)? l.w3));
            out.push((format!("layers.{i}.ffn.w2"), & $($m)? l.w2));
            out.push((format!("layers.{i}.ffn.c"), & $($m)? l.c));
            out.push((format!("layers.{i}.ffn.beta"), & $($m)? l.beta));
        }
        out.push(("final_norm".to_string(), & $($m)? s.final_norm));
        out.push(("linear_head.down".to_string(), & $($m)? s.head_down));
        out.push(("linear_head.up".to_string(), & $($m)? s.head_up));
        out.push(("linear_head.bias".to_string(), & $($m)? s.head_bias));
        out.push(("cross_head.embed.weight".to_string(), & $($m)? s.cross_embed_w));
        out.push(("cross_head.embed.bias".to_string(), & $($m)? s.cross_embed_b));
        out.push(("cross_head.chunk_pos".to_string(), & $($m)? s.cross_chunk_pos));
        out.push(("cross_head.wq".to_string(), & $($m)? s.cross_wq));
        out.push(("cross_head.wk".to_string(), & $($m)? s.cross_wk));
        out.push(("cross_head.wv".to_string(), & $($m)? s.cross_wv));
        out.push(("cross_head.null_k".to_string(), & $($m)? s.cross_null_k));
        out.push(("cross_head.null_v".to_string(), & $($m)? s.cross_null_v));
        out.push(("cross_head.wo".to_string(), & $($m)? s.cross_wo));
        out.push(("cross_head.bias".to_string(), & $($m)? s.cross_bias));
        out
    }};
}

/// Tensor names and shapes implied by a config, in serialization order.
pub fn param_shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    ModelParams::<f32>::zeros(cfg)
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape.clone()))
        .collect()
}

/// Closed-form parameter count.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let h = cfg.hidden_size;
    let p = cfg.patch_len;
    let f = cfg.ffn_dim();
    let hc = cfg.cross_dim;
    let r = cfg.head_rank;
    let mh = cfg.max_horizon;
    let layer = 2 * h + 4 * h * h + (f * h + f) + h * f + (h * h + h) + 1;
    let embed = h * 3 * p + h + p * h + cfg.n_pad_tokens * h + 3 * h;
    let linear_head = r * h + mh * r + mh;
    let cross_head =
        hc * p + hc + cfg.horizon_chunks() * hc + hc * h + 2 * hc * hc + 2 * hc + mh * hc + mh;
    embed + cfg.n_layers() * layer + h + linear_head + cross_head
}

/// Parameter counts grouped by top-level module.
pub fn param_breakdown(cfg: &ModelConfig) -> Vec<(String, usize)> {
    let mut groups: Vec<(String, usize)> = Vec::new();
    for (name, shape) in param_shapes(cfg) {
        let key = if name.starts_with("layers.") {
            name.splitn(3, '.').take(2).collect::<Vec<_>>().join(".")
        } else {
            name.split('.').next().unwrap_or(&name).to_string()
        };
        let n: usize = shape.iter().product();
        match groups.last_mut() {
            Some((k, c)) if *k == key => *c += n,
            _ => groups.push((key, n)),
        }
    }
    groups
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden_size;
        let p = cfg.patch_len;
        let f = cfg.ffn_dim();
        let hc = cfg.cross_dim;
        let layers = (0..cfg.n_layers())
            .map(|_| LayerParams {
                attn_norm: Tensor::zeros(&[h]),
                wq: Tensor::zeros(&[h, h]),
                wk: Tensor::zeros(&[h, h]),
                wv: Tensor::zeros(&[h, h]),
                wo: Tensor::zeros(&[h, h]),
                ffn_norm: Tensor::zeros(&[h]),
                w1: Tensor::zeros(&[f, h]),
                b: Tensor::zeros(&[f]),
                w3: Tensor::zeros(&[h, f]),
                w2: Tensor::zeros(&[h, h]),
                c: Tensor::zeros(&[h]),
                beta: Tensor::zeros(&[1]),
            })
            .collect();
        Self {
            patch_embed_w: Tensor::zeros(&[h, 3 * p]),
            patch_embed_b: Tensor::zeros(&[h]),
            missing_embed: Tensor::zeros(&[p, h]),
            pad_tokens: Tensor::zeros(&[cfg.n_pad_tokens, h]),
            role_embed: Tensor::zeros(&[3, h]),
            layers,
            final_norm: Tensor::zeros(&[h]),
            head_down: Tensor::zeros(&[cfg.head_rank, h]),
            head_up: Tensor::zeros(&[cfg.max_horizon, cfg.head_rank]),
            head_bias: Tensor::zeros(&[cfg.max_horizon]),
            cross_embed_w: Tensor::zeros(&[hc, p]),
            cross_embed_b: Tensor::zeros(&[hc]),
            cross_chunk_pos: Tensor::zeros(&[cfg.horizon_chunks(), hc]),
            cross_wq: Tensor::zeros(&[hc, h]),
            cross_wk: Tensor::zeros(&[hc, hc]),
            cross_wv: Tensor::zeros(&[hc, hc]),
            cross_null_k: Tensor::zeros(&[hc]),
            cross_null_v: Tensor::zeros(&[hc]),
            cross_wo: Tensor::zeros(&[cfg.max_horizon, hc]),
            cross_bias: Tensor::zeros(&[cfg.max_horizon]),
        }
    }

    /// Random initialization: fan-in scaled normals, residual output
    /// projections shrunk by depth, unit norm gains and swish slope.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let h = cfg.hidden_size;
        let p = cfg.patch_len;
        let f = cfg.ffn_dim();
        let hc = cfg.cross_dim;
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        let depth = 1.0 / (2.0 * cfg.n_layers() as f64).sqrt();
        let layers = (0..cfg.n_layers())
            .map(|_| LayerParams {
                attn_norm: Tensor::filled(&[h], F::one()),
                wq: Tensor::normal(&[h, h], fan(h), &mut r),
                wk: Tensor::normal(&[h, h], fan(h), &mut r),
                wv: Tensor::normal(&[h, h], fan(h), &mut r),
                wo: Tensor::normal(&[h, h], fan(h) * depth, &mut r),
                ffn_norm: Tensor::filled(&[h], F::one()),
                w1: Tensor::normal(&[f, h], fan(h), &mut r),
                b: Tensor::zeros(&[f]),
                w3: Tensor::normal(&[h, f], fan(f) * depth, &mut r),
                w2: Tensor::normal(&[h, h], fan(h), &mut r),
                c: Tensor::filled(&[h], F::one()),
                beta: Tensor::filled(&[1], F::one()),
            })
            .collect();
        Self {
            patch_embed_w: Tensor::normal(&[h, 3 * p], fan(3 * p), &mut r),
            patch_embed_b: Tensor::zeros(&[h]),
            missing_embed: Tensor::normal(&[p, h], 0.02, &mut r),
            pad_tokens: Tensor::normal(&[cfg.n_pad_tokens, h], 0.02, &mut r),
            role_embed: Tensor::normal(&[3, h], 0.02, &mut r),
            layers,
            final_norm: Tensor::filled(&[h], F::one()),
            head_down: Tensor::normal(&[cfg.head_rank, h], fan(h), &mut r),
            head_up: Tensor::normal(&[cfg.max_horizon, cfg.head_rank], 0.02, &mut r),
            head_bias: Tensor::zeros(&[cfg.max_horizon]),
            cross_embed_w: Tensor::normal(&[hc, p], fan(p), &mut r),
            cross_embed_b: Tensor::zeros(&[hc]),
            cross_chunk_pos: Tensor::normal(&[cfg.horizon_chunks(), hc], 0.02, &mut r),
            cross_wq: Tensor::normal(&[hc, h], fan(h), &mut r),
            cross_wk: Tensor::normal(&[hc, hc], fan(hc), &mut r),
            cross_wv: Tensor::normal(&[hc, hc], fan(hc), &mut r),
            cross_null_k: Tensor::normal(&[hc], 0.02, &mut r),
            cross_null_v: Tensor::normal(&[hc], 0.02, &mut r),
            cross_wo: Tensor::normal(&[cfg.max_horizon, hc], 0.02, &mut r),
            cross_bias: Tensor::zeros(&[cfg.max_horizon]),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor<F>)> {
        named_tensors!(self)
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        named_tensors!(self, mut)
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            patch_embed_w: self.patch_embed_w.cast(),
            patch_embed_b: self.patch_embed_b.cast(),
            missing_embed: self.missing_embed.cast(),
            pad_tokens: self.pad_tokens.cast(),
            role_embed: self.role_embed.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    attn_norm: l.attn_norm.cast(),
                    wq: l.wq.cast(),
                    wk: l.wk.cast(),
                    wv: l.wv.cast(),
                    wo: l.wo.cast(),
                    ffn_norm: l.ffn_norm.cast(),
                    w1: l.w1.cast(),
                    b: l.b.cast(),
                    w3: l.w3.cast(),
                    w2: l.w2.cast(),
                    c: l.c.cast(),
                    beta: l.beta.cast(),
                })
                .collect(),
            final_norm: self.final_norm.cast(),
            head_down: self.head_down.cast(),
            head_up: self.head_up.cast(),
            head_bias: self.head_bias.cast(),
            cross_embed_w: self.cross_embed_w.cast(),
            cross_embed_b: self.cross_embed_b.cast(),
            cross_chunk_pos: self.cross_chunk_pos.cast(),
            cross_wq: self.cross_wq.cast(),
            cross_wk: self.cross_wk.cast(),
            cross_wv: self.cross_wv.cast(),
            cross_null_k: self.cross_null_k.cast(),
            cross_null_v: self.cross_null_v.cast(),
            cross_wo: self.cross_wo.cast(),
            cross_bias: self.cross_bias.cast(),
        }
    }

    /// A zero tensor set with the same shapes (gradient accumulator).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|(_, t)| t.fill_zero());
        z
    }

    pub fn fill_zero(&mut self) {
        self.tensors_mut().into_iter().for_each(|(_, t)| t.fill_zero());
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += *y);
        }
    }

    pub fn scale(&mut self, s: F) {
        for (_, t) in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.data.iter())
            .map(|v| v.f64() * v.f64())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }

    /// Random perturbation used by tests that need a generic non-degenerate
    /// parameter set.
    pub fn jitter(&mut self, std: f64, seed: u64) {
        let mut r = rng::seeded(seed);
        for (_, t) in self.tensors_mut() {
            for v in t.data.iter_mut() {
                *v += F::of(std * (r.random::<f64>() * 2.0 - 1.0));
            }
        }
    }
}
