mod common;

use common::{max_abs_diff, random_series};
use rand::Rng;
use tiny_tsm::model::network::{self, embed};
use tiny_tsm::model::{forward_series, ChannelNorm, ModelConfig, ModelInput, ModelParams, Query};
use tiny_tsm::rng;
use tiny_tsm::series::ChannelRole;

fn toy_params(seed: u64) -> ModelParams<f32> {
    let mut p = ModelParams::init(&ModelConfig::toy(), seed);
    p.jitter(0.02, seed ^ 0xABCD);
    p
}

#[test]
fn perturbing_patch_p_leaves_earlier_predictions_unchanged() {
    let cfg = ModelConfig::toy();
    let mut r = rng::seeded(11);
    for case in 0..50u64 {
        let params = toy_params(case);
        let channels = r.random_range(1..4);
        let len = r.random_range(40..400);
        let series = random_series(100 + case, channels, len, 0.05);
        let base = forward_series(&cfg, &params, &series, 48, None, true).unwrap();
        let n = base.patch_ends.len();
        if n < 2 {
            continue;
        }
        let p = r.random_range(1..n);
        let start = base.patch_ends[p - 1] + 1;
        let perturbed = series.map_values(|_, t, v| if t >= start { v * 3.0 - 7.0 } else { v });
        let out = forward_series(&cfg, &params, &perturbed, 48, None, true).unwrap();
        for k in 0..base.channels.len() {
            for i in 0..p {
                let d = max_abs_diff(&base.per_patch[k][i], &out.per_patch[k][i]);
                assert!(d <= 1e-5, "case {case}: patch {i} < {p} moved by {d}");
            }
        }
        assert_ne!(base.final_pred, out.final_pred);
    }
}

#[test]
fn channel_permutation_is_equivariant() {
    let cfg = ModelConfig::toy();
    let params = toy_params(3);
    let series = random_series(5, 3, 200, 0.0).with_target(1).unwrap();
    let order = [2, 0, 1];
    let permuted = series.permute_channels(&order).unwrap();
    let a = forward_series(&cfg, &params, &series, 40, None, true).unwrap();
    let b = forward_series(&cfg, &params, &permuted, 40, None, true).unwrap();
    for (kb, &orig) in order.iter().enumerate() {
        let ka = a.channels.iter().position(|&c| c == orig).unwrap();
        assert!(max_abs_diff(&a.final_pred[ka], &b.final_pred[kb]) < 1e-4);
        for i in 0..a.patch_ends.len() {
            assert!(max_abs_diff(&a.per_patch[ka][i], &b.per_patch[kb][i]) < 1e-4);
        }
    }
}

fn single_channel_input(cfg: &ModelConfig, y: &[f64], mask: &[bool]) -> ModelInput<f64> {
    let norm = ChannelNorm::rolling(y, mask).unwrap();
    ModelInput::encode(cfg, &[norm], &[ChannelRole::Target], y.len()).unwrap().0
}

#[test]
fn all_missing_patch_embeds_to_sum_of_missing_rows() {
    let cfg = ModelConfig::toy();
    let mut p = ModelParams::<f64>::init(&cfg, 1);
    p.patch_embed_b.fill_zero();
    p.role_embed.fill_zero();
    let h = cfg.hidden_size;
    let mut y: Vec<f64> = (0..64).map(|t| (t as f64).sin()).collect();
    let mut mask = vec![true; 64];
    for t in 32..64 {
        mask[t] = false;
    }
    let expected: Vec<f64> = (0..h).map(|k| (0..32).map(|j| p.missing_embed.row(j)[k]).sum()).collect();
    for scale in [1.0, -50.0] {
        y.iter_mut().skip(32).for_each(|v| *v *= scale);
        let x = embed(&cfg, &p, &single_channel_input(&cfg, &y, &mask));
        let row = &x[(cfg.n_pad_tokens + 1) * h..(cfg.n_pad_tokens + 2) * h];
        assert!(max_abs_diff(row, &expected) < 1e-12);
    }
}

#[test]
fn embedding_shape_and_zero_case() {
    let cfg = ModelConfig::toy();
    let p = ModelParams::<f64>::zeros(&cfg);
    let norms: Vec<_> = (0..3).map(|_| ChannelNorm::rolling(&[0.0; 128], &[true; 128]).unwrap()).collect();
    let roles = [ChannelRole::Target, ChannelRole::Covariate, ChannelRole::Covariate];
    let (input, _) = ModelInput::<f64>::encode(&cfg, &norms, &roles, 128).unwrap();
    let x = embed(&cfg, &p, &input);
    assert_eq!(x.len(), 3 * (4 + cfg.n_pad_tokens) * cfg.hidden_size);
    assert!(x.iter().all(|&v| v == 0.0));
}

#[test]
fn zero_cross_head_leaves_linear_head() {
    let cfg = ModelConfig::toy();
    let mut p = toy_params(8);
    p.cross_wo.fill_zero();
    p.cross_bias.fill_zero();
    let series = random_series(9, 3, 150, 0.0).with_known_future([2]).unwrap();
    let future = vec![vec![0.5; 64]];
    let out = forward_series(&cfg, &p, &series, 64, Some(&future), true).unwrap();

    // Linear head recomputed from the encoder output.
    let norms: Vec<_> =
        (0..3).map(|c| ChannelNorm::rolling(series.channel(c), series.channel_mask(c)).unwrap()).collect();
    let roles: Vec<_> = (0..3).map(|c| series.role(c)).collect();
    let (input, layout) = ModelInput::<f32>::encode(&cfg, &norms, &roles, 150).unwrap();
    let enc = network::encoder_forward(&cfg, &p, &input);
    let h = cfg.hidden_size;
    let row = cfg.n_pad_tokens + layout.n_patches - 1;
    let x = &enc.hidden[row * h..(row + 1) * h];
    let rms = (x.iter().map(|v| v * v).sum::<f32>() / h as f32 + 1e-6).sqrt();
    let hf: Vec<f32> = x.iter().zip(&p.final_norm.data).map(|(v, g)| v / rms * g).collect();
    let z: Vec<f32> = (0..cfg.head_rank).map(|k| p.head_down.row(k).iter().zip(&hf).map(|(a, b)| a * b).sum()).collect();
    for j in 0..64 {
        let lin: f32 = p.head_up.row(j).iter().zip(&z).map(|(a, b)| a * b).sum::<f32>() + p.head_bias.data[j];
        assert!((lin as f64 - out.final_pred[0][j]).abs() < 1e-4);
    }
}

#[test]
fn no_known_future_cross_head_is_constant() {
    let cfg = ModelConfig::toy();
    let mut p = toy_params(4);
    p.head_up.fill_zero();
    p.head_bias.fill_zero();
    let a = forward_series(&cfg, &p, &random_series(1, 2, 100, 0.0), 20, None, true).unwrap();
    let b = forward_series(&cfg, &p, &random_series(2, 1, 300, 0.1), 20, None, true).unwrap();
    let expected: Vec<f64> = (0..20)
        .map(|j| {
            let wo: f32 = p.cross_wo.row(j).iter().zip(&p.cross_null_v.data).map(|(a, b)| a * b).sum();
            (wo + p.cross_bias.data[j]) as f64
        })
        .collect();
    for out in [&a, &b] {
        for pred in &out.final_pred {
            assert!(max_abs_diff(pred, &expected) < 1e-6);
        }
    }
}

#[test]
fn output_shapes_and_determinism() {
    let cfg = ModelConfig::toy();
    let p = toy_params(5);
    let series = random_series(3, 1, 256, 0.0);
    let a = forward_series(&cfg, &p, &series, 64, None, true).unwrap();
    let b = forward_series(&cfg, &p, &series, 64, None, true).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.per_patch.len(), 1);
    assert_eq!(a.per_patch[0].len(), 8);
    assert!(a.per_patch[0].iter().all(|v| v.len() == 32));
    assert_eq!(a.final_pred[0].len(), 64);
    let sparse = forward_series(&cfg, &p, &series, 64, None, false).unwrap();
    assert!(max_abs_diff(&sparse.final_pred[0], &a.final_pred[0]) < 1e-5);
    assert!(forward_series(&cfg, &p, &series, 961, None, false).is_err());
}

#[test]
fn known_future_channels_are_not_forecast() {
    let cfg = ModelConfig::toy();
    let p = toy_params(6);
    let series = random_series(4, 3, 96, 0.0).with_known_future([1]).unwrap();
    let out = forward_series(&cfg, &p, &series, 10, Some(&[vec![0.0; 10]]), true).unwrap();
    assert_eq!(out.channels, vec![0, 2]);
    assert!(forward_series(&cfg, &p, &series, 10, None, true).is_err());
}

#[test]
fn interior_queries_match_dense_path() {
    let cfg = ModelConfig::toy();
    let p = toy_params(7);
    let series = random_series(8, 1, 100, 0.0);
    let out = forward_series(&cfg, &p, &series, 16, None, true).unwrap();
    let mut input = single_channel_input(&cfg, series.channel(0), series.channel_mask(0)).clone();
    let p64 = p.cast::<f64>();
    input.queries.push(Query { channel: 0, patch: 1, steps: 16, cov_set: None });
    let (preds, _) = network::forward(&cfg, &p64, &input);
    assert!(max_abs_diff(&preds[0], &out.per_patch[0][1]) < 1e-4);
}
