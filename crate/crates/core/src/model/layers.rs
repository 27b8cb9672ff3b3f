//! Encoder building blocks with explicit backward passes.
//!
//! Activations are row-major `(rows, width)` buffers. A block processes
//! `nseq` independent sequences of `len` tokens each: rows `s*len..(s+1)*len`
//! belong to sequence `s`.

use super::params::LayerParams;
use super::real::{matmul_dytx, matmul_dyw, matmul_xwt, sigmoid, Real};

pub const RMS_EPS: f64 = 1e-6;
const ROPE_BASE: f64 = 10_000.0;

/// Rotary position tables for positions `0..len`.
#[derive(Debug, Clone)]
pub struct Rope<F> {
    cos: Vec<F>,
    sin: Vec<F>,
    half: usize,
}

impl<F: Real> Rope<F> {
    pub fn new(len: usize, head_dim: usize) -> Self {
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(len * half);
        let mut sin = Vec::with_capacity(len * half);
        for pos in 0..len {
            for i in 0..half {
                let theta = pos as f64 * ROPE_BASE.powf(-2.0 * i as f64 / head_dim as f64);
                cos.push(F::of(theta.cos()));
                sin.push(F::of(theta.sin()));
            }
        }
        Self { cos, sin, half }
    }

    /// Rotates each head's consecutive pairs in place; `inverse` applies the
    /// transpose rotation (used for gradients).
    pub fn apply(&self, x: &mut [F], len: usize, heads: usize, inverse: bool) {
        let dh = 2 * self.half;
        let width = heads * dh;
        for (row, chunk) in x.chunks_mut(width).enumerate() {
            let pos = row % len;
            let cos = &self.cos[pos * self.half..(pos + 1) * self.half];
            let sin = &self.sin[pos * self.half..(pos + 1) * self.half];
            for head in chunk.chunks_mut(dh) {
                for i in 0..self.half {
                    let (a, b) = (head[2 * i], head[2 * i + 1]);
                    let s = if inverse { -sin[i] } else { sin[i] };
                    head[2 * i] = a * cos[i] - b * s;
                    head[2 * i + 1] = a * s + b * cos[i];
                }
            }
        }
    }
}

/// `out = x / rms(x) * g` per row; stores `1 / rms` per row in `inv`.
pub fn rmsnorm_forward<F: Real>(x: &[F], g: &[F], out: &mut [F], inv: &mut [F]) {
    let h = g.len();
    let eps = F::of(RMS_EPS);
    for ((xr, or), iv) in x.chunks(h).zip(out.chunks_mut(h)).zip(inv.iter_mut()) {
        let ms = xr.iter().map(|&v| v * v).sum::<F>() / F::of(h as f64);
        let r = F::one() / (ms + eps).sqrt();
        *iv = r;
        for ((o, &v), &gi) in or.iter_mut().zip(xr).zip(g) {
            *o = v * r * gi;
        }
    }
}

/// Accumulates `dx` and `dg` for [`rmsnorm_forward`].
pub fn rmsnorm_backward<F: Real>(x: &[F], g: &[F], inv: &[F], dout: &[F], dx: &mut [F], dg: &mut [F]) {
    let h = g.len();
    let hf = F::of(h as f64);
    for (((xr, dr), dxr), &r) in x.chunks(h).zip(dout.chunks(h)).zip(dx.chunks_mut(h)).zip(inv) {
        let mut dot = F::zero();
        for i in 0..h {
            dg[i] += dr[i] * xr[i] * r;
            dot += g[i] * dr[i] * xr[i];
        }
        let r3 = r * r * r / hf;
        for i in 0..h {
            dxr[i] += g[i] * dr[i] * r - xr[i] * r3 * dot;
        }
    }
}

/// Multi-head scaled dot-product attention over `nseq` sequences.
/// `probs` receives `(nseq, heads, len, len)` attention weights.
#[allow(clippy::too_many_arguments)]
pub fn attention_forward<F: Real>(
    q: &[F],
    k: &[F],
    v: &[F],
    nseq: usize,
    len: usize,
    heads: usize,
    causal: bool,
    out: &mut [F],
    probs: &mut [F],
) {
    let width = q.len() / (nseq * len);
    let dh = width / heads;
    let scale = F::of(1.0 / (dh as f64).sqrt());
    out.iter_mut().for_each(|o| *o = F::zero());
    for s in 0..nseq {
        for hd in 0..heads {
            let pbase = (s * heads + hd) * len * len;
            for i in 0..len {
                let qi = &q[(s * len + i) * width + hd * dh..][..dh];
                let limit = if causal { i + 1 } else { len };
                let prow = &mut probs[pbase + i * len..pbase + (i + 1) * len];
                let mut max = F::neg_infinity();
                for j in 0..limit {
                    let kj = &k[(s * len + j) * width + hd * dh..][..dh];
                    let sc = qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<F>() * scale;
                    prow[j] = sc;
                    if sc > max {
                        max = sc;
                    }
                }
                let mut total = F::zero();
                for p in prow.iter_mut().take(limit) {
                    *p = (*p - max).exp();
                    total += *p;
                }
                for p in prow.iter_mut().take(limit) {
                    *p /= total;
                }
                for p in prow.iter_mut().skip(limit) {
                    *p = F::zero();
                }
                let oi = &mut out[(s * len + i) * width + hd * dh..][..dh];
                for j in 0..limit {
                    let pij = prow[j];
                    let vj = &v[(s * len + j) * width + hd * dh..][..dh];
                    for (o, &vv) in oi.iter_mut().zip(vj) {
                        *o += pij * vv;
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn attention_backward<F: Real>(
    q: &[F],
    k: &[F],
    v: &[F],
    probs: &[F],
    dout: &[F],
    nseq: usize,
    len: usize,
    heads: usize,
    causal: bool,
    dq: &mut [F],
    dk: &mut [F],
    dv: &mut [F],
) {
    let width = q.len() / (nseq * len);
    let dh = width / heads;
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let mut dp = vec![F::zero(); len];
    for s in 0..nseq {
        for hd in 0..heads {
            let pbase = (s * heads + hd) * len * len;
            for i in 0..len {
                let limit = if causal { i + 1 } else { len };
                let prow = &probs[pbase + i * len..pbase + (i + 1) * len];
                let doi = &dout[(s * len + i) * width + hd * dh..][..dh];
                let mut weighted = F::zero();
                for j in 0..limit {
                    let vj = &v[(s * len + j) * width + hd * dh..][..dh];
                    dp[j] = doi.iter().zip(vj).map(|(&a, &b)| a * b).sum();
                    weighted += prow[j] * dp[j];
                    let dvj = &mut dv[(s * len + j) * width + hd * dh..][..dh];
                    for (d, &g) in dvj.iter_mut().zip(doi) {
                        *d += prow[j] * g;
                    }
                }
                let qi_off = (s * len + i) * width + hd * dh;
                for j in 0..limit {
                    let ds = prow[j] * (dp[j] - weighted) * scale;
                    if ds == F::zero() {
                        continue;
                    }
                    let kj_off = (s * len + j) * width + hd * dh;
                    for t in 0..dh {
                        dq[qi_off + t] += ds * k[kj_off + t];
                        dk[kj_off + t] += ds * q[qi_off + t];
                    }
                }
            }
        }
    }
}

/// SwiGLU: `(W3 swish_beta(W1 x + b)) * (W2 x + c)`, elementwise product.
pub struct SwiGluCache<F> {
    pub u: Vec<F>,
    pub sw: Vec<F>,
    pub g: Vec<F>,
    pub lin: Vec<F>,
}

pub fn swiglu_forward<F: Real>(p: &LayerParams<F>, x: &[F], rows: usize) -> (Vec<F>, SwiGluCache<F>) {
    let h = p.w2.shape[0];
    let f = p.w1.shape[0];
    let beta = p.beta.data[0];
    let mut u = vec![F::zero(); rows * f];
    matmul_xwt(x, &p.w1.data, &mut u, rows, h, f, false);
    for row in u.chunks_mut(f) {
        row.iter_mut().zip(&p.b.data).for_each(|(a, &b)| *a += b);
    }
    let sw: Vec<F> = u.iter().map(|&z| z * sigmoid(beta * z)).collect();
    let mut g = vec![F::zero(); rows * h];
    matmul_xwt(&sw, &p.w3.data, &mut g, rows, f, h, false);
    let mut lin = vec![F::zero(); rows * h];
    matmul_xwt(x, &p.w2.data, &mut lin, rows, h, h, false);
    for row in lin.chunks_mut(h) {
        row.iter_mut().zip(&p.c.data).for_each(|(a, &c)| *a += c);
    }
    let out = g.iter().zip(&lin).map(|(&a, &b)| a * b).collect();
    (out, SwiGluCache { u, sw, g, lin })
}

/// Returns `dx` and accumulates parameter gradients.
pub fn swiglu_backward<F: Real>(
    p: &LayerParams<F>,
    x: &[F],
    cache: &SwiGluCache<F>,
    dout: &[F],
    rows: usize,
    grads: &mut LayerParams<F>,
) -> Vec<F> {
    let h = p.w2.shape[0];
    let f = p.w1.shape[0];
    let beta = p.beta.data[0];
    let dg: Vec<F> = dout.iter().zip(&cache.lin).map(|(&d, &l)| d * l).collect();
    let dlin: Vec<F> = dout.iter().zip(&cache.g).map(|(&d, &g)| d * g).collect();

    let mut dx = vec![F::zero(); rows * h];
    matmul_dytx(&dlin, x, &mut grads.w2.data, rows, h, h);
    for row in dlin.chunks(h) {
        grads.c.data.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
    }
    matmul_dyw(&dlin, &p.w2.data, &mut dx, rows, h, h, false);

    matmul_dytx(&dg, &cache.sw, &mut grads.w3.data, rows, h, f);
    let mut dsw = vec![F::zero(); rows * f];
    matmul_dyw(&dg, &p.w3.data, &mut dsw, rows, h, f, false);

    let mut dbeta = F::zero();
    let du: Vec<F> = dsw
        .iter()
        .zip(&cache.u)
        .map(|(&d, &z)| {
            let s = sigmoid(beta * z);
            let ds = s * (F::one() - s);
            dbeta += d * z * z * ds;
            d * (s + z * beta * ds)
        })
        .collect();
    grads.beta.data[0] += dbeta;
    matmul_dytx(&du, x, &mut grads.w1.data, rows, f, h);
    for row in du.chunks(f) {
        grads.b.data.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
    }
    matmul_dyw(&du, &p.w1.data, &mut dx, rows, f, h, true);
    dx
}

pub struct BlockCache<F> {
    x: Vec<F>,
    inv1: Vec<F>,
    a: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    probs: Vec<F>,
    o: Vec<F>,
    h1: Vec<F>,
    inv2: Vec<F>,
    bn: Vec<F>,
    ffn: SwiGluCache<F>,
}

/// Shape of one block invocation.
#[derive(Debug, Clone, Copy)]
pub struct BlockShape {
    pub nseq: usize,
    pub len: usize,
    pub heads: usize,
    pub causal: bool,
}

impl BlockShape {
    fn rows(&self) -> usize {
        self.nseq * self.len
    }
}

/// `h1 = x + MHA(RMSNorm(x))`, `out = h1 + SwiGLU(RMSNorm(h1))`.
pub fn block_forward<F: Real>(
    p: &LayerParams<F>,
    x: Vec<F>,
    shape: BlockShape,
    rope: Option<&Rope<F>>,
) -> (Vec<F>, BlockCache<F>) {
    let h = p.attn_norm.len();
    let rows = shape.rows();
    let mut a = vec![F::zero(); rows * h];
    let mut inv1 = vec![F::zero(); rows];
    rmsnorm_forward(&x, &p.attn_norm.data, &mut a, &mut inv1);

    let mut q = vec![F::zero(); rows * h];
    let mut k = vec![F::zero(); rows * h];
    let mut v = vec![F::zero(); rows * h];
    matmul_xwt(&a, &p.wq.data, &mut q, rows, h, h, false);
    matmul_xwt(&a, &p.wk.data, &mut k, rows, h, h, false);
    matmul_xwt(&a, &p.wv.data, &mut v, rows, h, h, false);
    if let Some(rope) = rope {
        rope.apply(&mut q, shape.len, shape.heads, false);
        rope.apply(&mut k, shape.len, shape.heads, false);
    }
    let mut o = vec![F::zero(); rows * h];
    let mut probs = vec![F::zero(); shape.nseq * shape.heads * shape.len * shape.len];
    attention_forward(&q, &k, &v, shape.nseq, shape.len, shape.heads, shape.causal, &mut o, &mut probs);

    let mut h1 = x.clone();
    matmul_xwt(&o, &p.wo.data, &mut h1, rows, h, h, true);

    let mut bn = vec![F::zero(); rows * h];
    let mut inv2 = vec![F::zero(); rows];
    rmsnorm_forward(&h1, &p.ffn_norm.data, &mut bn, &mut inv2);
    let (f, ffn) = swiglu_forward(p, &bn, rows);
    let out = h1.iter().zip(&f).map(|(&r, &d)| r + d).collect();
    (out, BlockCache { x, inv1, a, q, k, v, probs, o, h1, inv2, bn, ffn })
}

/// Returns the gradient w.r.t. the block input and accumulates into `grads`.
pub fn block_backward<F: Real>(
    p: &LayerParams<F>,
    cache: &BlockCache<F>,
    dout: &[F],
    shape: BlockShape,
    rope: Option<&Rope<F>>,
    grads: &mut LayerParams<F>,
) -> Vec<F> {
    let h = p.attn_norm.len();
    let rows = shape.rows();

    let dbn = swiglu_backward(p, &cache.bn, &cache.ffn, dout, rows, grads);
    let mut dh1 = dout.to_vec();
    rmsnorm_backward(&cache.h1, &p.ffn_norm.data, &cache.inv2, &dbn, &mut dh1, &mut grads.ffn_norm.data);

    matmul_dytx(&dh1, &cache.o, &mut grads.wo.data, rows, h, h);
    let mut d_o = vec![F::zero(); rows * h];
    matmul_dyw(&dh1, &p.wo.data, &mut d_o, rows, h, h, false);

    let mut dq = vec![F::zero(); rows * h];
    let mut dk = vec![F::zero(); rows * h];
    let mut dv = vec![F::zero(); rows * h];
    attention_backward(
        &cache.q,
        &cache.k,
        &cache.v,
        &cache.probs,
        &d_o,
        shape.nseq,
        shape.len,
        shape.heads,
        shape.causal,
        &mut dq,
        &mut dk,
        &mut dv,
    );
    if let Some(rope) = rope {
        rope.apply(&mut dq, shape.len, shape.heads, true);
        rope.apply(&mut dk, shape.len, shape.heads, true);
    }
    matmul_dytx(&dq, &cache.a, &mut grads.wq.data, rows, h, h);
    matmul_dytx(&dk, &cache.a, &mut grads.wk.data, rows, h, h);
    matmul_dytx(&dv, &cache.a, &mut grads.wv.data, rows, h, h);
    let mut da = vec![F::zero(); rows * h];
    matmul_dyw(&dq, &p.wq.data, &mut da, rows, h, h, false);
    matmul_dyw(&dk, &p.wk.data, &mut da, rows, h, h, true);
    matmul_dyw(&dv, &p.wv.data, &mut da, rows, h, h, true);

    let mut dx = dh1;
    rmsnorm_backward(&cache.x, &p.attn_norm.data, &cache.inv1, &da, &mut dx, &mut grads.attn_norm.data);
    dx
}
