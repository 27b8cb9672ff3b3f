//! Full network: embedding, interleaved encoder, and the two forecast heads.
//!
//! Hidden states live in one `(channels * (n_pad + patches), hidden)` buffer,
//! channel-major. Temporal layers treat each channel as a sequence; spatial
//! layers gather the non-pad positions into per-position channel sequences.

use super::config::{LayerKind, ModelConfig};
use super::input::ModelInput;
use super::layers::{block_backward, block_forward, rmsnorm_backward, rmsnorm_forward, BlockCache, BlockShape, Rope};
use super::params::ModelParams;
use super::real::{matmul_dytx, matmul_dyw, matmul_xwt, Real};

struct Dims {
    c: usize,
    n: usize,
    pad: usize,
    l: usize,
    h: usize,
    p: usize,
}

impl Dims {
    fn new<F>(cfg: &ModelConfig, input: &ModelInput<F>) -> Self {
        let pad = cfg.n_pad_tokens;
        Self {
            c: input.n_channels,
            n: input.n_patches,
            pad,
            l: pad + input.n_patches,
            h: cfg.hidden_size,
            p: cfg.patch_len,
        }
    }

    fn row(&self, c: usize, i: usize) -> usize {
        c * self.l + self.pad + i
    }

    /// Hidden rows in spatial order `(patch, channel)`.
    fn spatial_rows(&self) -> Vec<usize> {
        (0..self.n).flat_map(|i| (0..self.c).map(move |c| self.row(c, i))).collect()
    }
}

fn gather<F: Real>(x: &[F], rows: &[usize], h: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(rows.len() * h);
    for &r in rows {
        out.extend_from_slice(&x[r * h..(r + 1) * h]);
    }
    out
}

fn scatter<F: Real>(dst: &mut [F], src: &[F], rows: &[usize], h: usize) {
    for (k, &r) in rows.iter().enumerate() {
        dst[r * h..(r + 1) * h].copy_from_slice(&src[k * h..(k + 1) * h]);
    }
}

struct CrossSetCache<F> {
    emb: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
}

struct QueryCross<F> {
    probs: Vec<F>,
    ctx: Vec<F>,
}

/// Activations kept for the backward pass.
pub struct ForwardCache<F> {
    blocks: Vec<BlockCache<F>>,
    pre_final: Vec<F>,
    inv_final: Vec<F>,
    hq: Vec<F>,
    z: Vec<F>,
    qv: Vec<F>,
    sets: Vec<CrossSetCache<F>>,
    cross: Vec<QueryCross<F>>,
}

/// Hidden states after the encoder, `(channels, n_pad + patches, hidden)`.
pub struct Encoded<F> {
    pub hidden: Vec<F>,
    pub n_channels: usize,
    pub len: usize,
}

/// Patch embedding plus prepended pad tokens.
pub fn embed<F: Real>(cfg: &ModelConfig, p: &ModelParams<F>, input: &ModelInput<F>) -> Vec<F> {
    let d = Dims::new(cfg, input);
    let rows = d.c * d.n;
    let mut e = vec![F::zero(); rows * d.h];
    matmul_xwt(&input.features, &p.patch_embed_w.data, &mut e, rows, 3 * d.p, d.h, false);
    let mut x = vec![F::zero(); d.c * d.l * d.h];
    for c in 0..d.c {
        for k in 0..d.pad {
            x[(c * d.l + k) * d.h..][..d.h].copy_from_slice(p.pad_tokens.row(k));
        }
        let role = p.role_embed.row(input.roles[c].index());
        for i in 0..d.n {
            let dst = &mut x[d.row(c, i) * d.h..][..d.h];
            let src = &e[(c * d.n + i) * d.h..][..d.h];
            for t in 0..d.h {
                dst[t] = src[t] + p.patch_embed_b.data[t] + role[t];
            }
            let miss = &input.missing[(c * d.n + i) * d.p..][..d.p];
            for (j, _) in miss.iter().enumerate().filter(|(_, &m)| m) {
                dst.iter_mut().zip(p.missing_embed.row(j)).for_each(|(a, &b)| *a += b);
            }
        }
    }
    x
}

fn run_encoder<F: Real>(
    cfg: &ModelConfig,
    p: &ModelParams<F>,
    d: &Dims,
    mut x: Vec<F>,
) -> (Vec<F>, Vec<BlockCache<F>>) {
    let rope = Rope::new(d.l, cfg.head_dim());
    let srows = d.spatial_rows();
    let mut caches = Vec::with_capacity(cfg.n_layers());
    for (layer, kind) in p.layers.iter().zip(cfg.layer_kinds()) {
        match kind {
            LayerKind::Temporal => {
                let shape = BlockShape { nseq: d.c, len: d.l, heads: cfg.n_heads, causal: true };
                let (out, cache) = block_forward(layer, x, shape, Some(&rope));
                x = out;
                caches.push(cache);
            }
            LayerKind::Spatial => {
                let shape = BlockShape { nseq: d.n, len: d.c, heads: cfg.n_heads, causal: false };
                let (out, cache) = block_forward(layer, gather(&x, &srows, d.h), shape, None);
                scatter(&mut x, &out, &srows, d.h);
                caches.push(cache);
            }
        }
    }
    (x, caches)
}

/// Runs embedding and the encoder stack (no final norm).
pub fn encoder_forward<F: Real>(cfg: &ModelConfig, p: &ModelParams<F>, input: &ModelInput<F>) -> Encoded<F> {
    let d = Dims::new(cfg, input);
    let (hidden, _) = run_encoder(cfg, p, &d, embed(cfg, p, input));
    Encoded { hidden, n_channels: d.c, len: d.l }
}

fn softmax<F: Real>(s: &mut [F]) {
    let max = s.iter().fold(F::neg_infinity(), |a, &b| a.max(b));
    let mut total = F::zero();
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    s.iter_mut().for_each(|v| *v /= total);
}

/// Forward pass returning one prediction vector per query, in normalized
/// scale, plus the activations needed by [`backward`].
pub fn forward<F: Real>(
    cfg: &ModelConfig,
    p: &ModelParams<F>,
    input: &ModelInput<F>,
) -> (Vec<Vec<F>>, ForwardCache<F>) {
    let d = Dims::new(cfg, input);
    let (pre_final, blocks) = run_encoder(cfg, p, &d, embed(cfg, p, input));
    let total_rows = d.c * d.l;
    let mut normed = vec![F::zero(); total_rows * d.h];
    let mut inv_final = vec![F::zero(); total_rows];
    rmsnorm_forward(&pre_final, &p.final_norm.data, &mut normed, &mut inv_final);

    let qrows: Vec<usize> = input.queries.iter().map(|q| d.row(q.channel, q.patch)).collect();
    let nq = qrows.len();
    let hq = gather(&normed, &qrows, d.h);
    let r = cfg.head_rank;
    let hc = cfg.cross_dim;
    let mut z = vec![F::zero(); nq * r];
    matmul_xwt(&hq, &p.head_down.data, &mut z, nq, d.h, r, false);
    let mut qv = vec![F::zero(); nq * hc];
    matmul_xwt(&hq, &p.cross_wq.data, &mut qv, nq, d.h, hc, false);

    let sets: Vec<CrossSetCache<F>> = input
        .cov_sets
        .iter()
        .map(|cs| {
            let nt = cs.n_tokens();
            let mut emb = vec![F::zero(); nt * hc];
            matmul_xwt(&cs.values, &p.cross_embed_w.data, &mut emb, nt, d.p, hc, false);
            for (t, &chunk) in cs.chunks.iter().enumerate() {
                let row = &mut emb[t * hc..(t + 1) * hc];
                for k in 0..hc {
                    row[k] += p.cross_embed_b.data[k] + p.cross_chunk_pos.row(chunk)[k];
                }
            }
            let mut k = vec![F::zero(); nt * hc];
            let mut v = vec![F::zero(); nt * hc];
            matmul_xwt(&emb, &p.cross_wk.data, &mut k, nt, hc, hc, false);
            matmul_xwt(&emb, &p.cross_wv.data, &mut v, nt, hc, hc, false);
            CrossSetCache { emb, k, v }
        })
        .collect();

    let scale = F::of(1.0 / (hc as f64).sqrt());
    let mut preds = Vec::with_capacity(nq);
    let mut cross = Vec::with_capacity(nq);
    for (qi, q) in input.queries.iter().enumerate() {
        let qvec = &qv[qi * hc..(qi + 1) * hc];
        let dot = |a: &[F], b: &[F]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<F>();
        let set = q.cov_set.map(|s| &sets[s]);
        let nt = set.map_or(0, |s| s.k.len() / hc);
        let mut probs = Vec::with_capacity(nt + 1);
        probs.push(dot(qvec, &p.cross_null_k.data) * scale);
        if let Some(s) = set {
            for t in 0..nt {
                probs.push(dot(qvec, &s.k[t * hc..(t + 1) * hc]) * scale);
            }
        }
        softmax(&mut probs);
        let mut ctx: Vec<F> = p.cross_null_v.data.iter().map(|&v| v * probs[0]).collect();
        if let Some(s) = set {
            for t in 0..nt {
                let vt = &s.v[t * hc..(t + 1) * hc];
                ctx.iter_mut().zip(vt).for_each(|(a, &b)| *a += probs[t + 1] * b);
            }
        }
        let zq = &z[qi * r..(qi + 1) * r];
        let out: Vec<F> = (0..q.steps)
            .map(|j| {
                dot(p.head_up.row(j), zq)
                    + p.head_bias.data[j]
                    + dot(p.cross_wo.row(j), &ctx)
                    + p.cross_bias.data[j]
            })
            .collect();
        preds.push(out);
        cross.push(QueryCross { probs, ctx });
    }
    let cache = ForwardCache { blocks, pre_final, inv_final, hq, z, qv, sets, cross };
    (preds, cache)
}

/// Accumulates parameter gradients of `sum_q dpreds[q] . preds[q]`.
pub fn backward<F: Real>(
    cfg: &ModelConfig,
    p: &ModelParams<F>,
    input: &ModelInput<F>,
    cache: &ForwardCache<F>,
    dpreds: &[Vec<F>],
    g: &mut ModelParams<F>,
) {
    let d = Dims::new(cfg, input);
    let r = cfg.head_rank;
    let hc = cfg.cross_dim;
    let nq = input.queries.len();
    let scale = F::of(1.0 / (hc as f64).sqrt());

    let mut dz = vec![F::zero(); nq * r];
    let mut dqv = vec![F::zero(); nq * hc];
    let mut dsets: Vec<(Vec<F>, Vec<F>)> =
        cache.sets.iter().map(|s| (vec![F::zero(); s.k.len()], vec![F::zero(); s.v.len()])).collect();
    for (qi, q) in input.queries.iter().enumerate() {
        let dout = &dpreds[qi];
        let zq = &cache.z[qi * r..(qi + 1) * r];
        let qc = &cache.cross[qi];
        let dzq = &mut dz[qi * r..(qi + 1) * r];
        let mut dctx = vec![F::zero(); hc];
        for (j, &dj) in dout.iter().enumerate().take(q.steps) {
            if dj == F::zero() {
                continue;
            }
            let up = p.head_up.row(j);
            dzq.iter_mut().zip(up).for_each(|(a, &u)| *a += dj * u);
            g.head_up.row_mut(j).iter_mut().zip(zq).for_each(|(a, &zz)| *a += dj * zz);
            g.head_bias.data[j] += dj;
            let wo = p.cross_wo.row(j);
            dctx.iter_mut().zip(wo).for_each(|(a, &w)| *a += dj * w);
            g.cross_wo.row_mut(j).iter_mut().zip(&qc.ctx).for_each(|(a, &c)| *a += dj * c);
            g.cross_bias.data[j] += dj;
        }

        // Attention over [null, tokens...].
        let set = q.cov_set.map(|s| &cache.sets[s]);
        let nt = qc.probs.len() - 1;
        let value = |t: usize| -> &[F] {
            if t == 0 {
                &p.cross_null_v.data
            } else {
                &set.unwrap().v[(t - 1) * hc..t * hc]
            }
        };
        let key = |t: usize| -> &[F] {
            if t == 0 {
                &p.cross_null_k.data
            } else {
                &set.unwrap().k[(t - 1) * hc..t * hc]
            }
        };
        let da: Vec<F> = (0..=nt).map(|t| dctx.iter().zip(value(t)).map(|(&a, &b)| a * b).sum()).collect();
        let weighted: F = qc.probs.iter().zip(&da).map(|(&a, &b)| a * b).sum();
        let qvec = &cache.qv[qi * hc..(qi + 1) * hc];
        let dq = &mut dqv[qi * hc..(qi + 1) * hc];
        for t in 0..=nt {
            let pt = qc.probs[t];
            let ds = pt * (da[t] - weighted) * scale;
            dq.iter_mut().zip(key(t)).for_each(|(a, &k)| *a += ds * k);
            if t == 0 {
                g.cross_null_k.data.iter_mut().zip(qvec).for_each(|(a, &qq)| *a += ds * qq);
                g.cross_null_v.data.iter_mut().zip(&dctx).for_each(|(a, &dc)| *a += pt * dc);
            } else {
                let (dk, dv) = &mut dsets[q.cov_set.unwrap()];
                dk[(t - 1) * hc..t * hc].iter_mut().zip(qvec).for_each(|(a, &qq)| *a += ds * qq);
                dv[(t - 1) * hc..t * hc].iter_mut().zip(&dctx).for_each(|(a, &dc)| *a += pt * dc);
            }
        }
    }

    for ((cs, sc), (dk, dv)) in input.cov_sets.iter().zip(&cache.sets).zip(&dsets) {
        let nt = cs.n_tokens();
        matmul_dytx(dk, &sc.emb, &mut g.cross_wk.data, nt, hc, hc);
        matmul_dytx(dv, &sc.emb, &mut g.cross_wv.data, nt, hc, hc);
        let mut de = vec![F::zero(); nt * hc];
        matmul_dyw(dk, &p.cross_wk.data, &mut de, nt, hc, hc, false);
        matmul_dyw(dv, &p.cross_wv.data, &mut de, nt, hc, hc, true);
        matmul_dytx(&de, &cs.values, &mut g.cross_embed_w.data, nt, hc, d.p);
        for (t, &chunk) in cs.chunks.iter().enumerate() {
            let row = &de[t * hc..(t + 1) * hc];
            g.cross_embed_b.data.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
            g.cross_chunk_pos.row_mut(chunk).iter_mut().zip(row).for_each(|(a, &b)| *a += b);
        }
    }

    let mut dhq = vec![F::zero(); nq * d.h];
    matmul_dytx(&dz, &cache.hq, &mut g.head_down.data, nq, r, d.h);
    matmul_dyw(&dz, &p.head_down.data, &mut dhq, nq, r, d.h, false);
    matmul_dytx(&dqv, &cache.hq, &mut g.cross_wq.data, nq, hc, d.h);
    matmul_dyw(&dqv, &p.cross_wq.data, &mut dhq, nq, hc, d.h, true);

    let total_rows = d.c * d.l;
    let mut dnormed = vec![F::zero(); total_rows * d.h];
    for (qi, q) in input.queries.iter().enumerate() {
        let row = d.row(q.channel, q.patch);
        dnormed[row * d.h..(row + 1) * d.h]
            .iter_mut()
            .zip(&dhq[qi * d.h..(qi + 1) * d.h])
            .for_each(|(a, &b)| *a += b);
    }
    let mut dx = vec![F::zero(); total_rows * d.h];
    rmsnorm_backward(&cache.pre_final, &p.final_norm.data, &cache.inv_final, &dnormed, &mut dx, &mut g.final_norm.data);

    let rope = Rope::new(d.l, cfg.head_dim());
    let srows = d.spatial_rows();
    let kinds = cfg.layer_kinds();
    for li in (0..p.layers.len()).rev() {
        let layer = &p.layers[li];
        let gl = &mut g.layers[li];
        match kinds[li] {
            LayerKind::Temporal => {
                let shape = BlockShape { nseq: d.c, len: d.l, heads: cfg.n_heads, causal: true };
                dx = block_backward(layer, &cache.blocks[li], &dx, shape, Some(&rope), gl);
            }
            LayerKind::Spatial => {
                let shape = BlockShape { nseq: d.n, len: d.c, heads: cfg.n_heads, causal: false };
                let dsub = block_backward(layer, &cache.blocks[li], &gather(&dx, &srows, d.h), shape, None, gl);
                scatter(&mut dx, &dsub, &srows, d.h);
            }
        }
    }

    // Embedding.
    let mut de = vec![F::zero(); d.c * d.n * d.h];
    for c in 0..d.c {
        for k in 0..d.pad {
            let src = &dx[(c * d.l + k) * d.h..][..d.h];
            g.pad_tokens.row_mut(k).iter_mut().zip(src).for_each(|(a, &b)| *a += b);
        }
        let role = input.roles[c].index();
        for i in 0..d.n {
            let src = &dx[d.row(c, i) * d.h..][..d.h];
            de[(c * d.n + i) * d.h..][..d.h].copy_from_slice(src);
            g.patch_embed_b.data.iter_mut().zip(src).for_each(|(a, &b)| *a += b);
            g.role_embed.row_mut(role).iter_mut().zip(src).for_each(|(a, &b)| *a += b);
            let miss = &input.missing[(c * d.n + i) * d.p..][..d.p];
            for (j, _) in miss.iter().enumerate().filter(|(_, &m)| m) {
                g.missing_embed.row_mut(j).iter_mut().zip(src).for_each(|(a, &b)| *a += b);
            }
        }
    }
    matmul_dytx(&de, &input.features, &mut g.patch_embed_w.data, d.c * d.n, d.h, 3 * d.p);
}
