mod common;

use common::gradcheck::check;
use common::random_series;
use tiny_tsm::model::{ModelConfig, ModelParams};
use tiny_tsm::training::{dense_example, test_at_end_example, LossMask};

#[test]
fn dense_loss_gradients_match_finite_differences() {
    let cfg = ModelConfig::toy();
    let mut params = ModelParams::<f64>::init(&cfg, 21);
    params.jitter(0.05, 22);
    let series = random_series(25, 2, 100 + 90, 0.05).with_known_future([1]).unwrap();
    let ex = dense_example::<f64>(&cfg, &series, 100, LossMask { horizon: 90, stride: 4, phase: 3 }).unwrap();
    let s = check(&cfg, &mut params, &[ex], 16, 26);
    println!("dense gradient check: {} coordinates, worst relative error {:.2e}", s.checked, s.worst);
}

#[test]
fn test_at_end_loss_gradients_match_finite_differences() {
    let cfg = ModelConfig::toy();
    let mut params = ModelParams::<f64>::init(&cfg, 31);
    params.jitter(0.05, 32);
    let series = random_series(33, 2, 200, 0.0);
    let ex = test_at_end_example::<f64>(&cfg, &series, 160, LossMask { horizon: 40, stride: 2, phase: 1 }).unwrap();
    let s = check(&cfg, &mut params, &[ex], 64, 34);
    println!("test-at-end gradient check: {} coordinates, worst relative error {:.2e}", s.checked, s.worst);
}
