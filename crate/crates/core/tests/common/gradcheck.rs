//! Central finite-difference check of `loss_and_grad` through `batch_loss`.

use rand::Rng;
use tiny_tsm::model::network;
use tiny_tsm::model::{ModelConfig, ModelParams};
use tiny_tsm::rng;
use tiny_tsm::training::{batch_loss, loss_and_grad, Example};

const STEP: f64 = 1e-3;
/// Gradients smaller than this are compared on an absolute scale; below it
/// finite-difference rounding noise dominates the relative error.
const FLOOR: f64 = 1e-5;
const DELTA: f64 = 1.0;

/// Loss through `batch_loss` plus, per included residual, whether it sits on
/// the quadratic branch of the Huber loss.
fn eval(cfg: &ModelConfig, p: &ModelParams<f64>, batch: &[Example<f64>]) -> (f64, Vec<bool>) {
    let mut sum = 0.0;
    let mut total = 0;
    let mut branches = Vec::new();
    for ex in batch {
        let (preds, _) = network::forward(cfg, p, &ex.input);
        let (mean, n) = batch_loss(&preds, &ex.targets, &ex.include, DELTA).unwrap();
        sum += mean * n as f64;
        total += n;
        for ((pr, t), m) in preds.iter().zip(&ex.targets).zip(&ex.include) {
            for ((a, b), &keep) in pr.iter().zip(t).zip(m) {
                if keep {
                    branches.push((a - b).abs() <= DELTA);
                }
            }
        }
    }
    (sum / total as f64, branches)
}

pub struct Summary {
    pub worst: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Checks up to `coords` random coordinates of every tensor; panics on a
/// relative error of 1e-6 or more.
pub fn check(cfg: &ModelConfig, params: &mut ModelParams<f64>, batch: &[Example<f64>], coords: usize, seed: u64) -> Summary {
    let (_, grads) = loss_and_grad(cfg, params, batch, DELTA).unwrap();
    let (_, center) = eval(cfg, params, batch);
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(|(_, t)| t.data.clone()).collect();
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let mut r = rng::seeded(seed);
    let mut s = Summary { worst: 0.0, checked: 0, skipped: 0 };
    for (ti, name) in names.iter().enumerate() {
        let len = analytic[ti].len();
        let coords: Vec<usize> =
            if len <= coords { (0..len).collect() } else { (0..coords).map(|_| r.random_range(0..len)).collect() };
        for k in coords {
            let orig = params.tensors()[ti].1.data[k];
            let mut crosses_kink = false;
            let mut at = |delta: f64| {
                params.tensors_mut()[ti].1.data[k] = orig + delta;
                let (v, branches) = eval(cfg, params, batch);
                params.tensors_mut()[ti].1.data[k] = orig;
                crosses_kink |= branches != center;
                v
            };
            let mut stencil = |h: f64| (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            // Richardson step on the fourth-order stencil
            let (coarse, fine) = (stencil(STEP), stencil(STEP / 2.0));
            let fd = fine + (fine - coarse) / 15.0;
            if crosses_kink {
                s.skipped += 1;
                continue;
            }
            let a = analytic[ti][k];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(FLOOR);
            assert!(rel < 1e-6, "{name}[{k}]: analytic {a:e} vs numeric {fd:e} (rel {rel:e})");
            s.worst = s.worst.max(rel);
            s.checked += 1;
        }
    }
    // a stencil straddling the Huber kink is not differentiable there; those
    // coordinates are rare and skipped
    assert!(s.skipped * 50 < s.checked, "{} of {} coordinates straddle the kink", s.skipped, s.checked);
    s
}
