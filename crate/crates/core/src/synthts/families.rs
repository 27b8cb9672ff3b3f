//! Base generator families and their samplers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::GenBatchParams;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SumOfSinusoids,
    TrendLinearNonlinear,
    PeriodicRandomWalk,
    ResetTrend,
    CircularReindex,
    ExplosivePeriodic,
    PhaseShiftPeriodic,
    FlooredPeriodic,
    IntegerCount,
    ApproxPeriodicInteger,
    PeriodicMixture,
    Noise,
    NoisyAr,
    Explosive,
    LocalTrend,
}

impl Family {
    pub const ALL: [Family; 15] = [
        Family::SumOfSinusoids,
        Family::TrendLinearNonlinear,
        Family::PeriodicRandomWalk,
        Family::ResetTrend,
        Family::CircularReindex,
        Family::ExplosivePeriodic,
        Family::PhaseShiftPeriodic,
        Family::FlooredPeriodic,
        Family::IntegerCount,
        Family::ApproxPeriodicInteger,
        Family::PeriodicMixture,
        Family::Noise,
        Family::NoisyAr,
        Family::Explosive,
        Family::LocalTrend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::SumOfSinusoids => "sum_of_sinusoids",
            Family::TrendLinearNonlinear => "trend_linear_nonlinear",
            Family::PeriodicRandomWalk => "periodic_random_walk",
            Family::ResetTrend => "reset_trend",
            Family::CircularReindex => "circular_reindex",
            Family::ExplosivePeriodic => "explosive_periodic",
            Family::PhaseShiftPeriodic => "phase_shift_periodic",
            Family::FlooredPeriodic => "floored_periodic",
            Family::IntegerCount => "integer_count",
            Family::ApproxPeriodicInteger => "approx_periodic_integer",
            Family::PeriodicMixture => "periodic_mixture",
            Family::Noise => "noise",
            Family::NoisyAr => "noisy_ar",
            Family::Explosive => "explosive",
            Family::LocalTrend => "local_trend",
        }
    }

    /// Families whose samples carry a dominant cycle at `spec.period()`.
    pub fn is_periodic(self) -> bool {
        matches!(
            self,
            Family::SumOfSinusoids
                | Family::PeriodicRandomWalk
                | Family::ExplosivePeriodic
                | Family::PhaseShiftPeriodic
                | Family::FlooredPeriodic
                | Family::ApproxPeriodicInteger
                | Family::PeriodicMixture
        )
    }

    pub fn is_integer(self) -> bool {
        matches!(self, Family::IntegerCount | Family::ApproxPeriodicInteger)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub period: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl Sinusoid {
    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * t / self.period + self.phase).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TrendShape {
    Linear { slope: f64 },
    Quadratic { a: f64, b: f64 },
    Exponential { rate: f64 },
    Logistic { rate: f64, midpoint: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    StudentT,
    RandomWalk,
}

impl NoiseKind {
    pub fn is_white(self) -> bool {
        !matches!(self, NoiseKind::RandomWalk)
    }
}

/// Family-specific parameters. Everything that is not listed here (noise
/// paths, event times, counts) is drawn from the RNG handed to `sample_base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorParams {
    Sinusoids { components: Vec<Sinusoid>, offset: f64 },
    Trend { shape: TrendShape, level: f64, scale: f64 },
    PeriodicRandomWalk { season: Sinusoid, step_std: f64, drifting_profile: bool },
    ResetTrend { slope: f64, reset_prob: f64, exponential: bool },
    CircularReindex { k: usize, inner: Box<GeneratorParams> },
    ExplosivePeriodic { season: Sinusoid, episode_rate: f64, episode_len: usize, factor: f64, additive: bool },
    PhaseShift { season: Sinusoid, n_shifts: usize, square: bool },
    Floored { components: Vec<Sinusoid>, offset: f64 },
    IntegerCount { base_rate: f64, season: Option<Sinusoid> },
    ApproxPeriodicInteger { season: Sinusoid, level: f64, jitter: f64, pattern_noise: f64 },
    PeriodicMixture { parts: Vec<(f64, GeneratorParams)>, multiplicative: bool },
    Noise { noise: NoiseKind, scale: f64 },
    NoisyAr { coeffs: Vec<f64>, noise_std: f64 },
    Explosive { season: Sinusoid, growth: f64, episode_rate: f64, volatility: bool },
    LocalTrend { n_changes: usize, slope_std: f64, state_space: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseGeneratorSpec {
    pub family: Family,
    pub variant: String,
    pub params: GeneratorParams,
}

impl BaseGeneratorSpec {
    /// The configured cycle length, when the family has one.
    pub fn period(&self) -> Option<f64> {
        if !self.family.is_periodic() {
            return None;
        }
        main_period(&self.params)
    }
}

fn main_period(p: &GeneratorParams) -> Option<f64> {
    use GeneratorParams::*;
    match p {
        Sinusoids { components, .. } | Floored { components, .. } => components.first().map(|c| c.period),
        PeriodicRandomWalk { season, .. }
        | ExplosivePeriodic { season, .. }
        | PhaseShift { season, .. }
        | ApproxPeriodicInteger { season, .. }
        | Explosive { season, .. } => Some(season.period),
        IntegerCount { season, .. } => season.map(|s| s.period),
        PeriodicMixture { parts, .. } => parts.first().and_then(|(_, q)| main_period(q)),
        _ => None,
    }
}

fn family_of(p: &GeneratorParams) -> Family {
    use GeneratorParams::*;
    match p {
        Sinusoids { .. } => Family::SumOfSinusoids,
        Trend { .. } => Family::TrendLinearNonlinear,
        PeriodicRandomWalk { .. } => Family::PeriodicRandomWalk,
        ResetTrend { .. } => Family::ResetTrend,
        CircularReindex { .. } => Family::CircularReindex,
        ExplosivePeriodic { .. } => Family::ExplosivePeriodic,
        PhaseShift { .. } => Family::PhaseShiftPeriodic,
        Floored { .. } => Family::FlooredPeriodic,
        IntegerCount { .. } => Family::IntegerCount,
        ApproxPeriodicInteger { .. } => Family::ApproxPeriodicInteger,
        PeriodicMixture { .. } => Family::PeriodicMixture,
        Noise { .. } => Family::Noise,
        NoisyAr { .. } => Family::NoisyAr,
        Explosive { .. } => Family::Explosive,
        LocalTrend { .. } => Family::LocalTrend,
    }
}

/// `output_i = x[(k * i) mod L]` for `i = 1..=L`.
pub fn circular_reindex(x: &[f64], k: usize) -> Vec<f64> {
    let l = x.len();
    (1..=l).map(|i| x[(k % l) * (i % l) % l]).collect()
}

pub struct Sampler {
    pub family: Family,
    pub variant: &'static str,
    pub sample: fn(&GenBatchParams, &mut Rng) -> GeneratorParams,
}

static REGISTRY: &[Sampler] = &[
    Sampler { family: Family::SumOfSinusoids, variant: "single", sample: s_single_sine },
    Sampler { family: Family::SumOfSinusoids, variant: "multi", sample: s_multi_sine },
    Sampler { family: Family::SumOfSinusoids, variant: "harmonics", sample: s_harmonic_sine },
    Sampler { family: Family::TrendLinearNonlinear, variant: "linear", sample: s_trend_linear },
    Sampler { family: Family::TrendLinearNonlinear, variant: "quadratic", sample: s_trend_quadratic },
    Sampler { family: Family::TrendLinearNonlinear, variant: "exponential", sample: s_trend_exp },
    Sampler { family: Family::TrendLinearNonlinear, variant: "logistic", sample: s_trend_logistic },
    Sampler { family: Family::PeriodicRandomWalk, variant: "drifting_profile", sample: s_prw_profile },
    Sampler { family: Family::PeriodicRandomWalk, variant: "walk_plus_season", sample: s_prw_walk },
    Sampler { family: Family::ResetTrend, variant: "linear", sample: s_reset_linear },
    Sampler { family: Family::ResetTrend, variant: "exponential", sample: s_reset_exp },
    Sampler { family: Family::CircularReindex, variant: "sinusoid", sample: s_reindex_sine },
    Sampler { family: Family::CircularReindex, variant: "random_walk", sample: s_reindex_walk },
    Sampler { family: Family::ExplosivePeriodic, variant: "multiplicative", sample: s_exp_periodic_mul },
    Sampler { family: Family::ExplosivePeriodic, variant: "additive", sample: s_exp_periodic_add },
    Sampler { family: Family::PhaseShiftPeriodic, variant: "sine", sample: s_phase_sine },
    Sampler { family: Family::PhaseShiftPeriodic, variant: "square", sample: s_phase_square },
    Sampler { family: Family::FlooredPeriodic, variant: "single", sample: s_floor_single },
    Sampler { family: Family::FlooredPeriodic, variant: "multi", sample: s_floor_multi },
    Sampler { family: Family::IntegerCount, variant: "constant_rate", sample: s_count_const },
    Sampler { family: Family::IntegerCount, variant: "seasonal_rate", sample: s_count_season },
    Sampler { family: Family::ApproxPeriodicInteger, variant: "rounded", sample: s_api_rounded },
    Sampler { family: Family::ApproxPeriodicInteger, variant: "perturbed_pattern", sample: s_api_pattern },
    Sampler { family: Family::PeriodicMixture, variant: "additive", sample: s_mix_add },
    Sampler { family: Family::PeriodicMixture, variant: "multiplicative", sample: s_mix_mul },
    Sampler { family: Family::Noise, variant: "gaussian", sample: s_noise_gauss },
    Sampler { family: Family::Noise, variant: "uniform", sample: s_noise_unif },
    Sampler { family: Family::Noise, variant: "student_t", sample: s_noise_t },
    Sampler { family: Family::Noise, variant: "random_walk", sample: s_noise_rw },
    Sampler { family: Family::NoisyAr, variant: "ar1", sample: s_ar1 },
    Sampler { family: Family::NoisyAr, variant: "ar2", sample: s_ar2 },
    Sampler { family: Family::Explosive, variant: "growth_episodes", sample: s_explosive_growth },
    Sampler { family: Family::Explosive, variant: "volatility_bursts", sample: s_explosive_vol },
    Sampler { family: Family::LocalTrend, variant: "piecewise_linear", sample: s_local_piecewise },
    Sampler { family: Family::LocalTrend, variant: "state_space", sample: s_local_state },
];

pub fn registry() -> &'static [Sampler] {
    REGISTRY
}

pub fn samplers(family: Family) -> impl Iterator<Item = &'static Sampler> {
    REGISTRY.iter().filter(move |s| s.family == family)
}

/// Draws one of the family's samplers uniformly and samples its parameters.
pub fn sample_spec(family: Family, params: &GenBatchParams, rng: &mut Rng) -> BaseGeneratorSpec {
    let options: Vec<&Sampler> = samplers(family).collect();
    let s = options[rng.random_range(0..options.len())];
    BaseGeneratorSpec { family, variant: s.variant.to_string(), params: (s.sample)(params, rng) }
}

/// Realizes `spec` over `params.seq_len` steps.
pub fn sample_base(spec: &BaseGeneratorSpec, params: &GenBatchParams, rng: &mut Rng) -> Result<Vec<f64>> {
    if params.seq_len < 8 {
        return Err(Error::InvalidArgument(format!("seq_len {} < 8", params.seq_len)));
    }
    if family_of(&spec.params) != spec.family {
        return Err(Error::InvalidArgument(format!(
            "{} parameters given for family {}",
            family_of(&spec.params),
            spec.family
        )));
    }
    Ok(realize(&spec.params, params.seq_len, rng))
}

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Event indicator with per-step probability `rate`.
fn events(len: usize, rate: f64, rng: &mut Rng) -> Vec<bool> {
    (0..len).map(|_| rng.random_bool(rate.clamp(0.0, 1.0))).collect()
}

fn realize(p: &GeneratorParams, len: usize, rng: &mut Rng) -> Vec<f64> {
    use GeneratorParams::*;
    let ts = (0..len).map(|t| t as f64);
    match p {
        Sinusoids { components, offset } => ts.map(|t| offset + components.iter().map(|c| c.at(t)).sum::<f64>()).collect(),
        Trend { shape, level, scale } => {
            let n = len as f64;
            ts.map(|t| {
                let u = t / n;
                let v = match *shape {
                    TrendShape::Linear { slope } => slope * u,
                    TrendShape::Quadratic { a, b } => a * u * u + b * u,
                    TrendShape::Exponential { rate } => (rate * u).exp(),
                    TrendShape::Logistic { rate, midpoint } => 1.0 / (1.0 + (-rate * (u - midpoint)).exp()),
                };
                level + scale * v
            })
            .collect()
        }
        PeriodicRandomWalk { season, step_std, drifting_profile } => {
            if *drifting_profile {
                // One random-walk offset per phase of the cycle, updated once per cycle.
                let per = season.period.round().max(2.0) as usize;
                let mut offsets = vec![0.0; per];
                (0..len)
                    .map(|t| {
                        let j = t % per;
                        offsets[j] += step_std * gauss(rng);
                        season.at(t as f64) + offsets[j]
                    })
                    .collect()
            } else {
                let mut w = 0.0;
                (0..len)
                    .map(|t| {
                        w += step_std * gauss(rng);
                        season.at(t as f64) + w
                    })
                    .collect()
            }
        }
        ResetTrend { slope, reset_prob, exponential } => {
            let resets = events(len, *reset_prob, rng);
            let mut age = 0.0;
            resets
                .into_iter()
                .map(|r| {
                    age = if r { 0.0 } else { age + 1.0 };
                    if *exponential {
                        (slope * age).min(6.0).exp() - 1.0
                    } else {
                        slope * age
                    }
                })
                .collect()
        }
        CircularReindex { k, inner } => circular_reindex(&realize(inner, len, rng), *k),
        ExplosivePeriodic { season, episode_rate, episode_len, factor, additive } => {
            let starts = events(len, *episode_rate, rng);
            let mut left = 0usize;
            let mut age = 0usize;
            (0..len)
                .map(|t| {
                    if starts[t] && left == 0 {
                        left = *episode_len;
                        age = 0;
                    }
                    let base = season.at(t as f64);
                    let boost = if left > 0 {
                        left -= 1;
                        age += 1;
                        // Geometric ramp up to `factor` over the episode.
                        factor.powf(age as f64 / *episode_len as f64)
                    } else {
                        1.0
                    };
                    if *additive {
                        base + season.amplitude * (boost - 1.0)
                    } else {
                        base * boost
                    }
                })
                .collect()
        }
        PhaseShift { season, n_shifts, square } => {
            let mut shifts: Vec<(usize, f64)> =
                (0..*n_shifts).map(|_| (rng.random_range(1..len), rng.random_range(0.25..1.75) * PI)).collect();
            shifts.sort_by_key(|s| s.0);
            let mut phase = 0.0;
            let mut next = 0;
            (0..len)
                .map(|t| {
                    while next < shifts.len() && shifts[next].0 == t {
                        phase += shifts[next].1;
                        next += 1;
                    }
                    let v = (2.0 * PI * t as f64 / season.period + season.phase + phase).sin();
                    season.amplitude * if *square { v.signum() } else { v }
                })
                .collect()
        }
        Floored { components, offset } => {
            ts.map(|t| (offset + components.iter().map(|c| c.at(t)).sum::<f64>()).max(0.0)).collect()
        }
        IntegerCount { base_rate, season } => (0..len)
            .map(|t| {
                let rate = match season {
                    Some(s) => base_rate * (1.0 + s.at(t as f64)).max(0.0),
                    None => *base_rate,
                };
                if rate <= 0.0 {
                    0.0
                } else {
                    Poisson::new(rate).expect("positive rate").sample(rng)
                }
            })
            .collect(),
        ApproxPeriodicInteger { season, level, jitter, pattern_noise } => {
            let per = season.period.round().max(2.0) as usize;
            let pattern: Vec<f64> = (0..per).map(|_| pattern_noise * gauss(rng)).collect();
            (0..len)
                .map(|t| {
                    let v = level + season.at(t as f64) + pattern[t % per] + jitter * gauss(rng);
                    v.round()
                })
                .collect()
        }
        PeriodicMixture { parts, multiplicative } => {
            let mut out = vec![if *multiplicative { 1.0 } else { 0.0 }; len];
            for (k, (w, q)) in parts.iter().enumerate() {
                let x = realize(q, len, rng);
                for (o, v) in out.iter_mut().zip(x) {
                    if *multiplicative && k > 0 {
                        *o *= 1.0 + w * v;
                    } else if *multiplicative {
                        *o = w * v;
                    } else {
                        *o += w * v;
                    }
                }
            }
            out
        }
        Noise { noise, scale } => {
            let t_dist = StudentT::new(4.0).expect("dof > 0");
            let mut w = 0.0;
            (0..len)
                .map(|_| match noise {
                    NoiseKind::Gaussian => scale * gauss(rng),
                    NoiseKind::Uniform => scale * rng.random_range(-1.0..1.0),
                    NoiseKind::StudentT => scale * t_dist.sample(rng),
                    NoiseKind::RandomWalk => {
                        w += scale * gauss(rng);
                        w
                    }
                })
                .collect()
        }
        NoisyAr { coeffs, noise_std } => {
            let mut out: Vec<f64> = Vec::with_capacity(len);
            for t in 0..len {
                let ar: f64 = coeffs.iter().enumerate().filter(|(i, _)| t > *i).map(|(i, a)| a * out[t - 1 - i]).sum();
                out.push(ar + noise_std * gauss(rng));
            }
            out
        }
        Explosive { season, growth, episode_rate, volatility } => {
            let starts = events(len, *episode_rate, rng);
            let mut level = 0.0f64;
            let mut active = false;
            (0..len)
                .map(|t| {
                    if starts[t] {
                        active = !active;
                    }
                    if active {
                        level = (level + growth).min(5.0);
                    } else {
                        level *= 0.9;
                    }
                    let s = season.at(t as f64);
                    if *volatility {
                        s + 0.1 * level.exp() * gauss(rng)
                    } else {
                        (1.0 + 0.5 * s) * level.exp()
                    }
                })
                .collect()
        }
        LocalTrend { n_changes, slope_std, state_space } => {
            if *state_space {
                let (mut level, mut slope) = (0.0, 0.0);
                (0..len)
                    .map(|_| {
                        slope += slope_std * 0.1 * gauss(rng);
                        level += slope + slope_std * gauss(rng);
                        level
                    })
                    .collect()
            } else {
                let mut cuts: Vec<usize> = (0..*n_changes).map(|_| rng.random_range(1..len)).collect();
                cuts.sort_unstable();
                let mut slope = slope_std * gauss(rng);
                let mut level = 0.0;
                let mut next = 0;
                (0..len)
                    .map(|t| {
                        while next < cuts.len() && cuts[next] == t {
                            slope = slope_std * gauss(rng);
                            next += 1;
                        }
                        level += slope;
                        level
                    })
                    .collect()
            }
        }
    }
}

fn season(bp: &GenBatchParams, rng: &mut Rng) -> Sinusoid {
    Sinusoid { period: bp.sample_period(rng) as f64, amplitude: 1.0, phase: rng.random_range(0.0..2.0 * PI) }
}

fn extra_sines(bp: &GenBatchParams, rng: &mut Rng, n: usize) -> Vec<Sinusoid> {
    (0..n)
        .map(|_| Sinusoid {
            period: bp.sample_period(rng) as f64,
            amplitude: rng.random_range(0.1..0.8),
            phase: rng.random_range(0.0..2.0 * PI),
        })
        .collect()
}

fn s_single_sine(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::Sinusoids { components: vec![season(bp, rng)], offset: rng.random_range(-1.0..1.0) }
}

fn s_multi_sine(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let mut components = vec![season(bp, rng)];
    let n = rng.random_range(1..=3);
    components.extend(extra_sines(bp, rng, n));
    GeneratorParams::Sinusoids { components, offset: rng.random_range(-1.0..1.0) }
}

fn s_harmonic_sine(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let base = season(bp, rng);
    let mut components = vec![base];
    for h in 2..=rng.random_range(2..=4) {
        components.push(Sinusoid {
            period: base.period / h as f64,
            amplitude: rng.random_range(0.05..0.5) / h as f64,
            phase: rng.random_range(0.0..2.0 * PI),
        });
    }
    GeneratorParams::Sinusoids { components, offset: 0.0 }
}

fn trend(shape: TrendShape, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::Trend { shape, level: rng.random_range(-2.0..2.0), scale: rng.random_range(0.5..3.0) }
}

fn sign(rng: &mut Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn s_trend_linear(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let slope = sign(rng) * rng.random_range(0.2..2.0);
    trend(TrendShape::Linear { slope }, rng)
}

fn s_trend_quadratic(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    trend(TrendShape::Quadratic { a, b }, rng)
}

fn s_trend_exp(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let rate = sign(rng) * rng.random_range(0.5..4.0);
    trend(TrendShape::Exponential { rate }, rng)
}

fn s_trend_logistic(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let (rate, midpoint) = (rng.random_range(4.0..20.0), rng.random_range(0.2..0.8));
    trend(TrendShape::Logistic { rate, midpoint }, rng)
}

fn s_prw_profile(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::PeriodicRandomWalk { season: season(bp, rng), step_std: rng.random_range(0.005..0.05), drifting_profile: true }
}

fn s_prw_walk(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::PeriodicRandomWalk { season: season(bp, rng), step_std: rng.random_range(0.005..0.05), drifting_profile: false }
}

fn s_reset_linear(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let n = bp.seq_len as f64;
    GeneratorParams::ResetTrend {
        slope: rng.random_range(0.01..0.2),
        reset_prob: rng.random_range(2.0..10.0) / n,
        exponential: false,
    }
}

fn s_reset_exp(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let n = bp.seq_len as f64;
    let reset_prob = rng.random_range(3.0..12.0) / n;
    GeneratorParams::ResetTrend { slope: rng.random_range(1.0..4.0) * reset_prob, reset_prob, exponential: true }
}

fn coprime_k(len: usize, rng: &mut Rng) -> usize {
    loop {
        let k = rng.random_range(2..=13usize);
        if gcd(k, len) == 1 {
            return k;
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn s_reindex_sine(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let inner = Box::new(s_multi_sine(bp, rng));
    GeneratorParams::CircularReindex { k: coprime_k(bp.seq_len, rng), inner }
}

fn s_reindex_walk(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let inner = Box::new(s_prw_walk(bp, rng));
    GeneratorParams::CircularReindex { k: coprime_k(bp.seq_len, rng), inner }
}

fn s_exp_periodic(bp: &GenBatchParams, rng: &mut Rng, additive: bool) -> GeneratorParams {
    let season = season(bp, rng);
    let episode_len = ((season.period * rng.random_range(0.5..3.0)) as usize).max(4);
    GeneratorParams::ExplosivePeriodic {
        season,
        episode_rate: rng.random_range(1.0..4.0) / bp.seq_len as f64,
        episode_len,
        factor: rng.random_range(2.0..6.0),
        additive,
    }
}

fn s_exp_periodic_mul(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    s_exp_periodic(bp, rng, false)
}

fn s_exp_periodic_add(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    s_exp_periodic(bp, rng, true)
}

fn s_phase_sine(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::PhaseShift { season: season(bp, rng), n_shifts: rng.random_range(1..=3), square: false }
}

fn s_phase_square(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::PhaseShift { season: season(bp, rng), n_shifts: rng.random_range(1..=3), square: true }
}

fn s_floor_single(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::Floored { components: vec![season(bp, rng)], offset: rng.random_range(-0.5..1.0) }
}

fn s_floor_multi(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let mut components = vec![season(bp, rng)];
    let n = rng.random_range(1..=2);
    components.extend(extra_sines(bp, rng, n).into_iter().map(|c| Sinusoid { amplitude: c.amplitude * 0.5, ..c }));
    GeneratorParams::Floored { components, offset: rng.random_range(-0.3..1.0) }
}

fn s_count_const(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::IntegerCount { base_rate: rng.random_range(0.2..30.0), season: None }
}

fn s_count_season(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let s = Sinusoid { amplitude: rng.random_range(0.3..1.0), ..season(bp, rng) };
    GeneratorParams::IntegerCount { base_rate: rng.random_range(1.0..30.0), season: Some(s) }
}

fn s_api_rounded(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let amp = rng.random_range(3.0..20.0);
    let s = Sinusoid { amplitude: amp, ..season(bp, rng) };
    GeneratorParams::ApproxPeriodicInteger { season: s, level: rng.random_range(0.0..2.0) * amp, jitter: rng.random_range(0.0..0.5), pattern_noise: 0.0 }
}

fn s_api_pattern(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    let amp = rng.random_range(3.0..20.0);
    let s = Sinusoid { amplitude: amp, ..season(bp, rng) };
    GeneratorParams::ApproxPeriodicInteger {
        season: s,
        level: rng.random_range(0.0..2.0) * amp,
        jitter: rng.random_range(0.0..0.3),
        pattern_noise: rng.random_range(0.1..0.4) * amp,
    }
}

fn periodic_part(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    match rng.random_range(0..3) {
        0 => s_single_sine(bp, rng),
        1 => s_phase_sine(bp, rng),
        _ => s_prw_profile(bp, rng),
    }
}

fn s_mix(bp: &GenBatchParams, rng: &mut Rng, multiplicative: bool) -> GeneratorParams {
    let mut parts = vec![(1.0, periodic_part(bp, rng))];
    for _ in 0..rng.random_range(1..=2) {
        parts.push((rng.random_range(0.2..0.6), periodic_part(bp, rng)));
    }
    GeneratorParams::PeriodicMixture { parts, multiplicative }
}

fn s_mix_add(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    s_mix(bp, rng, false)
}

fn s_mix_mul(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    s_mix(bp, rng, true)
}

fn noise(kind: NoiseKind, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::Noise { noise: kind, scale: rng.random_range(0.1..3.0) }
}

fn s_noise_gauss(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    noise(NoiseKind::Gaussian, rng)
}

fn s_noise_unif(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    noise(NoiseKind::Uniform, rng)
}

fn s_noise_t(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    noise(NoiseKind::StudentT, rng)
}

fn s_noise_rw(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    noise(NoiseKind::RandomWalk, rng)
}

fn s_ar1(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::NoisyAr { coeffs: vec![rng.random_range(-0.95..0.98)], noise_std: rng.random_range(0.1..1.0) }
}

fn s_ar2(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    // Stationary AR(2) from a pair of roots inside the unit circle.
    let r = rng.random_range(0.5..0.97);
    let theta = rng.random_range(0.05..PI);
    GeneratorParams::NoisyAr { coeffs: vec![2.0 * r * theta.cos(), -r * r], noise_std: rng.random_range(0.1..1.0) }
}

fn s_explosive_growth(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::Explosive {
        season: season(bp, rng),
        growth: rng.random_range(0.01..0.1),
        episode_rate: rng.random_range(2.0..8.0) / bp.seq_len as f64,
        volatility: false,
    }
}

fn s_explosive_vol(bp: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::Explosive {
        season: season(bp, rng),
        growth: rng.random_range(0.02..0.2),
        episode_rate: rng.random_range(2.0..8.0) / bp.seq_len as f64,
        volatility: true,
    }
}

fn s_local_piecewise(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::LocalTrend { n_changes: rng.random_range(1..=8), slope_std: rng.random_range(0.01..0.2), state_space: false }
}

fn s_local_state(_: &GenBatchParams, rng: &mut Rng) -> GeneratorParams {
    GeneratorParams::LocalTrend { n_changes: 0, slope_std: rng.random_range(0.01..0.2), state_space: true }
}
