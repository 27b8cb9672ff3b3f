//! Trains the toy model on a SynthTS stream and evaluates it against the
//! seasonal-naive baseline on synthetic holdouts.
//!
//! cargo run --release -p tiny-tsm --example toy_experiment -- [steps] [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use tiny_tsm::harness::holdout::HoldoutKind;
use tiny_tsm::harness::{emit_plots, run_eval_checkpoint, toy, write_report};
use tiny_tsm::inference::InferenceConfig;
use tiny_tsm::model::{save_params, ModelParams};
use tiny_tsm::training::{LossRecord, Objective, Trainer};

fn main() -> tiny_tsm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let out = PathBuf::from(args.get(2).cloned().unwrap_or_else(|| "toy_run".into()));
    std::fs::create_dir_all(&out).map_err(|e| tiny_tsm::Error::Io { path: out.clone(), source: e })?;

    let model = toy::model();
    let train = toy::train_config(steps);
    let mut stream = toy::stream(&train);
    let params = ModelParams::init(&model, train.seed);
    let mut trainer = Trainer::new(model.clone(), params, train, Objective::DenseNextToken, &mut stream)?;
    let start = Instant::now();
    let mut curve: Vec<LossRecord> = Vec::new();
    for _ in 0..steps {
        let rec = trainer.step()?;
        curve.push(rec);
        if rec.step % 100 == 0 {
            let recent = curve.iter().rev().take(100).map(|r| r.loss).sum::<f64>() / 100.0;
            println!("step {:>6}  loss {recent:.4}  {:.1}s", rec.step, start.elapsed().as_secs_f64());
        }
    }
    let params = trainer.params.clone();
    save_params(&model, &params, &out.join("toy.ckpt"))?;

    let icfg = InferenceConfig::default();
    for (kind, name) in [(HoldoutKind::Seasonal, "seasonal"), (HoldoutKind::Mixed, "mixed")] {
        let tasks = toy::holdout(kind)?;
        let report = run_eval_checkpoint(&model, &params, &tasks, &icfg)?;
        let o = report.overall();
        println!("{name}: mean rel MSE {:?}  gmean {:?}  failed {}", o.mean_rel_mse, o.gmean_rel_mse, report.failed.len());
        write_report(&report, &out.join(name))?;
        emit_plots(&report, &[("dense".into(), curve.clone())], &out.join(name))?;
    }
    Ok(())
}
