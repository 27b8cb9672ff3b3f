#![allow(dead_code)]

pub mod gradcheck;

use rand::Rng;
use tiny_tsm::rng;
use tiny_tsm::TimeSeries;

/// Random-walk-plus-seasonality channels with a few missing points.
pub fn random_series(seed: u64, channels: usize, len: usize, missing_rate: f64) -> TimeSeries {
    let mut r = rng::seeded(seed);
    let mut values = Vec::with_capacity(channels);
    let mut mask = Vec::with_capacity(channels);
    for _ in 0..channels {
        let period = r.random_range(4.0..40.0);
        let amp = r.random_range(0.5..3.0);
        let level = r.random_range(-5.0..5.0);
        let mut walk = 0.0;
        let mut row = Vec::with_capacity(len);
        let mut m = Vec::with_capacity(len);
        for t in 0..len {
            walk += r.random_range(-0.3..0.3);
            row.push(level + walk + amp * (std::f64::consts::TAU * t as f64 / period).sin());
            m.push(t == 0 || r.random::<f64>() >= missing_rate);
        }
        values.push(row);
        mask.push(m);
    }
    TimeSeries::with_mask(values, mask).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Periodogram power at bins `1..=n/2` of the demeaned series.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    use rustfft::num_complex::Complex;
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Strongest power within one bin of the frequency `1 / period`, over the
/// median power.
pub fn spectral_peak_ratio(x: &[f64], period: f64) -> f64 {
    let p = periodogram(x);
    let k = (x.len() as f64 / period).round() as usize;
    let peak = (k.saturating_sub(1).max(1)..=(k + 1).min(p.len())).map(|b| p[b - 1]).fold(0.0, f64::max);
    let mut sorted = p.clone();
    sorted.sort_by(f64::total_cmp);
    peak / sorted[sorted.len() / 2]
}

pub fn autocorr(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let var: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    let cov: f64 = (lag..n).map(|t| (x[t] - m) * (x[t - lag] - m)).sum();
    cov / var
}
