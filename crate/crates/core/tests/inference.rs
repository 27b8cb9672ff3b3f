mod common;

use common::random_series;
use proptest::prelude::*;
use std::cell::RefCell;
use tiny_tsm::inference::{
    mirror_ensemble, noise_ensemble, predict, predict_with, sifi_forecast, InferenceConfig, SifiStride,
};
use tiny_tsm::model::{forward_series, ModelConfig, ModelParams};
use tiny_tsm::series::{seasonal_naive, FrequencyTag};
use tiny_tsm::{Result, TimeSeries};

type Rows = Vec<Vec<f64>>;

fn toy() -> (ModelConfig, ModelParams<f32>) {
    let cfg = ModelConfig::toy();
    let mut p = ModelParams::init(&cfg, 4);
    p.jitter(0.02, 8);
    (cfg, p)
}

#[test]
fn mirror_is_odd_for_the_model() {
    let (cfg, p) = toy();
    let f = tiny_tsm::inference::ModelForecaster { config: &cfg, params: &p };
    let s = random_series(3, 2, 150, 0.05);
    let neg = s.map_values(|_, _, v| -v);
    let a = mirror_ensemble(&f, &s, 24, None).unwrap();
    let b = mirror_ensemble(&f, &neg, 24, None).unwrap();
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        assert_eq!(*x, -*y);
        assert!(x.is_finite());
    }
    assert_eq!(a, mirror_ensemble(&f, &s, 24, None).unwrap());
}

#[test]
fn noise_ensemble_mean_of_linear_forecaster() {
    // Mean of the last five values: unbiased under zero-mean noise, with
    // per-member std noise_frac * std(y) / sqrt(5).
    let f = |s: &TimeSeries, h: usize, _: Option<&[Vec<f64>]>| -> Result<Rows> {
        let y = s.channel(0);
        Ok(vec![vec![y[y.len() - 5..].iter().sum::<f64>() / 5.0; h]])
    };
    let s = random_series(1, 1, 200, 0.0);
    let plain = f(&s, 1, None).unwrap()[0][0];
    let (k, frac) = (400, 0.05);
    let got = noise_ensemble(&f, &s, 1, None, k, frac, 21).unwrap()[0][0];
    let sigma = frac * s.channel_std(0) / 5f64.sqrt();
    assert!((got - plain).abs() < 3.0 * sigma / (k as f64).sqrt(), "{got} vs {plain}");
}

#[test]
fn sifi_with_periodic_oracle_is_exact() {
    // Seasonal naive at the dominant calendar period is exact on a purely
    // periodic series; strided views keep that property.
    let oracle = |s: &TimeSeries, h: usize, _: Option<&[Vec<f64>]>| -> Result<Rows> {
        let p = s.frequency().unwrap().dominant_period();
        Ok(vec![seasonal_naive(s.channel(0), p, h).values])
    };
    let wave = |t: usize| ((t % 24) as f64 - 7.0).powi(2) + (t % 24 / 6) as f64;
    for (len, n, h) in [(101, 3, 30), (96, 2, 48), (240, 4, 17), (100, 1, 5)] {
        let s = TimeSeries::univariate((0..len).map(wave).collect())
            .unwrap()
            .with_frequency(Some(FrequencyTag::hourly()));
        let got = sifi_forecast(&oracle, &s, n, h, None).unwrap();
        let truth: Vec<f64> = (len..len + h).map(wave).collect();
        assert_eq!(got[0], truth, "len {len} n {n}");
    }
}

#[test]
fn everything_off_matches_bare_model() {
    let (cfg, p) = toy();
    let s = random_series(5, 3, 130, 0.1);
    let got = predict(&cfg, &p, &s, 40, None, &InferenceConfig::default()).unwrap();
    let bare = forward_series(&cfg, &p, &s, 40, None, false).unwrap().denormalized();
    assert_eq!(got.values, bare);
    assert_eq!(got.provenance.sifi_stride, 1);
    assert_eq!(got.provenance.ensemble_order, "model");
}

#[test]
fn zero_model_returns_last_mean() {
    let cfg = ModelConfig::toy();
    let p = ModelParams::<f32>::zeros(&cfg);
    let s = TimeSeries::new(vec![vec![4.25; 70], vec![-1.5; 70]]).unwrap();
    let got = predict(&cfg, &p, &s, 12, None, &InferenceConfig::default()).unwrap();
    assert_eq!(got.values, vec![vec![4.25; 12], vec![-1.5; 12]]);
}

#[test]
fn full_pipeline_is_finite_and_deterministic() {
    let (cfg, p) = toy();
    let s = random_series(8, 2, 300, 0.05);
    let icfg = InferenceConfig {
        use_mirror: true,
        noise_ensembles: 3,
        augment_channels: vec![
            tiny_tsm::inference::AugmentTransform::SignedSquare,
            tiny_tsm::inference::AugmentTransform::Smoothed,
        ],
        sifi_stride: SifiStride::Fixed(2),
        ..Default::default()
    };
    let a = predict(&cfg, &p, &s, 30, None, &icfg).unwrap();
    assert_eq!(a.values.len(), 2);
    assert!(a.values.iter().flatten().all(|v| v.is_finite()));
    assert_eq!(a, predict(&cfg, &p, &s, 30, None, &icfg).unwrap());
    assert_eq!(a.provenance.ensemble_order, "noise(mirror(model))");
}

#[test]
fn long_history_triggers_auto_stride() {
    let lens = RefCell::new(Vec::new());
    let f = |s: &TimeSeries, h: usize, _: Option<&[Vec<f64>]>| -> Result<Rows> {
        lens.borrow_mut().push(s.len());
        Ok(vec![vec![0.0; h]])
    };
    let s = TimeSeries::univariate(vec![1.0; 10_000]).unwrap();
    let r = predict_with(&f, 4096, &s, 10, None, &InferenceConfig::default()).unwrap();
    assert_eq!(r.provenance.sifi_stride, 3);
    assert_eq!(lens.borrow().len(), 3);
    assert!(lens.borrow().iter().all(|&l| l <= 3334));
}

proptest! {
    #[test]
    fn sifi_covers_every_step_once(n in 1usize..9, h in 1usize..120, extra in 0usize..9) {
        let len = 4 * n + extra;
        let s = TimeSeries::univariate((0..len).map(|v| v as f64).collect()).unwrap();
        let hits = RefCell::new(vec![0usize; h]);
        // Each view reports the fine index its coarse step j lands on.
        let f = |v: &TimeSeries, ch: usize, _: Option<&[Vec<f64>]>| -> Result<Rows> {
            let last = *v.channel(0).last().unwrap() as usize;
            let k = last + n - len;
            Ok(vec![(0..ch).map(|j| (k + j * n) as f64).collect()])
        };
        let out = sifi_forecast(&f, &s, n, h, None).unwrap();
        for (t, &v) in out[0].iter().enumerate() {
            prop_assert_eq!(v as usize, t);
            hits.borrow_mut()[t] += 1;
        }
        prop_assert!(hits.borrow().iter().all(|&c| c == 1));
    }
}
