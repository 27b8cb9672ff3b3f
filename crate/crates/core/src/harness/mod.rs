//! Evaluation against a seasonal-naive baseline: per-task relative MSE/MAE,
//! horizon-class aggregates, CSV/JSON reports and plots.

pub mod holdout;
pub mod plots;
pub mod toy;

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{predict, Forecaster, InferenceConfig};
use crate::model::{ModelConfig, ModelParams};
use crate::series::{seasonal_naive, TimeSeries};

pub use plots::emit_plots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mse,
    Mae,
}

impl Metric {
    /// Mean error over points where `truth` is finite; `None` when there are none.
    pub fn eval(self, pred: &[f64], truth: &[f64]) -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for (p, t) in pred.iter().zip(truth) {
            if t.is_finite() {
                let e = p - t;
                sum += match self {
                    Metric::Mse => e * e,
                    Metric::Mae => e.abs(),
                };
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// A relative error, or the marker for a baseline that is exact on the task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relative {
    Value(f64),
    UndefinedBaseline,
}

impl Relative {
    pub const SENTINEL: &'static str = "undefined-baseline";

    pub fn value(self) -> Option<f64> {
        match self {
            Relative::Value(v) => Some(v),
            Relative::UndefinedBaseline => None,
        }
    }
}

impl fmt::Display for Relative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relative::Value(v) => write!(f, "{v}"),
            Relative::UndefinedBaseline => f.write_str(Self::SENTINEL),
        }
    }
}

impl Serialize for Relative {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Relative::Value(v) => s.serialize_f64(*v),
            Relative::UndefinedBaseline => s.serialize_str(Self::SENTINEL),
        }
    }
}

impl<'de> Deserialize<'de> for Relative {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Relative::Value(v)),
            Raw::Text(s) if s == Relative::SENTINEL => Ok(Relative::UndefinedBaseline),
            Raw::Text(s) => s.parse().map(Relative::Value).map_err(serde::de::Error::custom),
        }
    }
}

/// `metric(model, truth) / metric(baseline, truth)` over observed (finite)
/// truth points.
pub fn relative_error(model: &[f64], baseline: &[f64], truth: &[f64], metric: Metric) -> Result<Relative> {
    if model.len() != truth.len() || baseline.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "model {}, baseline {}, truth {} steps",
            model.len(),
            baseline.len(),
            truth.len()
        )));
    }
    let m = metric.eval(model, truth).ok_or(Error::NoObservations)?;
    let b = metric.eval(baseline, truth).ok_or(Error::NoObservations)?;
    Ok(if b > 0.0 { Relative::Value(m / b) } else { Relative::UndefinedBaseline })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonClass {
    Short,
    Medium,
    Long,
}

impl HorizonClass {
    pub const ALL: [HorizonClass; 3] = [HorizonClass::Short, HorizonClass::Medium, HorizonClass::Long];

    pub fn name(self) -> &'static str {
        match self {
            HorizonClass::Short => "short",
            HorizonClass::Medium => "medium",
            HorizonClass::Long => "long",
        }
    }
}

/// Upper bounds (inclusive) of the short and medium classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonClasses {
    pub short_max: usize,
    pub medium_max: usize,
}

impl Default for HorizonClasses {
    fn default() -> Self {
        Self { short_max: 48, medium_max: 480 }
    }
}

impl HorizonClasses {
    pub fn classify(&self, horizon: usize) -> HorizonClass {
        if horizon <= self.short_max {
            HorizonClass::Short
        } else if horizon <= self.medium_max {
            HorizonClass::Medium
        } else {
            HorizonClass::Long
        }
    }
}

/// Forecast the last `horizon` steps of `dataset`'s target channel from the
/// `context_len` steps before them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTask {
    pub id: String,
    pub dataset: TimeSeries,
    pub context_len: usize,
    pub horizon: usize,
    pub season: usize,
    pub horizon_class: HorizonClass,
}

impl EvalTask {
    pub fn new(id: impl Into<String>, dataset: TimeSeries, context_len: usize, horizon: usize, season: Option<usize>) -> Result<Self> {
        if horizon == 0 || context_len == 0 {
            return Err(Error::InvalidArgument("context and horizon must be positive".into()));
        }
        if context_len + horizon > dataset.len() {
            return Err(Error::HorizonTooLong {
                requested: horizon,
                max_feasible: dataset.len().saturating_sub(context_len),
            });
        }
        let season = season.unwrap_or_else(|| dataset.frequency().map_or(1, |f| f.dominant_period()));
        if season == 0 {
            return Err(Error::InvalidArgument("season must be >= 1".into()));
        }
        let horizon_class = HorizonClasses::default().classify(horizon);
        Ok(Self { id: id.into(), dataset, context_len, horizon, season, horizon_class })
    }

    fn split(&self) -> usize {
        self.dataset.len() - self.horizon
    }

    pub fn history(&self) -> Result<TimeSeries> {
        let end = self.split();
        self.dataset.slice(end - self.context_len, end)
    }

    /// Target-channel truth with NaN at unobserved steps.
    pub fn truth(&self) -> Vec<f64> {
        let c = self.dataset.target_channel();
        let s = self.split();
        let (v, m) = (self.dataset.channel(c), self.dataset.channel_mask(c));
        (s..self.dataset.len()).map(|t| if m[t] { v[t] } else { f64::NAN }).collect()
    }

    /// Future rows of the known-future channels, ascending.
    pub fn future(&self) -> Option<Vec<Vec<f64>>> {
        let kf = self.dataset.known_future();
        (!kf.is_empty()).then(|| kf.iter().map(|&c| self.dataset.channel(c)[self.split()..].to_vec()).collect())
    }

    pub fn baseline(&self) -> Result<Vec<f64>> {
        let h = self.history()?;
        let c = h.target_channel();
        let y: Vec<f64> = h.channel(c).iter().zip(h.channel_mask(c)).map(|(&v, &m)| if m { v } else { f64::NAN }).collect();
        Ok(seasonal_naive(&y, self.season, self.horizon).values)
    }
}

/// What produces the "model" forecast in an evaluation.
pub enum Predictor<'a> {
    Model(&'a dyn Forecaster),
    /// The baseline itself, for harness self-checks.
    SeasonalNaive,
}

impl Predictor<'_> {
    fn forecast(&self, task: &EvalTask) -> Result<Vec<f64>> {
        match self {
            Predictor::SeasonalNaive => task.baseline(),
            Predictor::Model(f) => {
                let h = task.history()?;
                let fut = task.future();
                let rows = f.forecast(&h, task.horizon, fut.as_deref())?;
                let pos = h
                    .forecast_channels()
                    .iter()
                    .position(|&c| c == h.target_channel())
                    .expect("target is a forecast channel");
                rows.into_iter().nth(pos).ok_or_else(|| Error::ShapeMismatch("forecaster returned too few channels".into()))
            }
        }
    }
}

/// Model forecaster running the full inference pipeline.
pub struct PipelineForecaster<'a> {
    pub model: &'a ModelConfig,
    pub params: &'a ModelParams<f32>,
    pub inference: InferenceConfig,
}

impl Forecaster for PipelineForecaster<'_> {
    fn forecast(&self, series: &TimeSeries, horizon: usize, future: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        Ok(predict(self.model, self.params, series, horizon, future, &self.inference)?.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub horizon: usize,
    pub class: HorizonClass,
    pub mse_model: f64,
    pub mse_naive: f64,
    pub rel_mse: Relative,
    pub mae_model: f64,
    pub mae_naive: f64,
    pub rel_mae: Relative,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTask {
    pub task_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    /// "overall" or a horizon class name.
    pub class: String,
    pub n_tasks: usize,
    pub mean_rel_mse: Option<f64>,
    pub gmean_rel_mse: Option<f64>,
    pub mean_rel_mae: Option<f64>,
    pub gmean_rel_mae: Option<f64>,
    pub undefined_rel_mse: usize,
    pub undefined_rel_mae: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskResult>,
    pub failed: Vec<FailedTask>,
    pub summary: Vec<ClassSummary>,
    pub total_wall_ms: f64,
}

impl EvalReport {
    pub fn overall(&self) -> &ClassSummary {
        &self.summary[0]
    }

    pub fn class(&self, c: HorizonClass) -> &ClassSummary {
        self.summary.iter().find(|s| s.class == c.name()).expect("one summary per class")
    }
}

fn means(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let gmean = (values.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
    (Some(mean), Some(gmean))
}

fn summarize_group(class: &str, tasks: &[&TaskResult]) -> ClassSummary {
    let mse: Vec<f64> = tasks.iter().filter_map(|t| t.rel_mse.value()).collect();
    let mae: Vec<f64> = tasks.iter().filter_map(|t| t.rel_mae.value()).collect();
    let (mean_rel_mse, gmean_rel_mse) = means(&mse);
    let (mean_rel_mae, gmean_rel_mae) = means(&mae);
    ClassSummary {
        class: class.to_string(),
        n_tasks: tasks.len(),
        mean_rel_mse,
        gmean_rel_mse,
        mean_rel_mae,
        gmean_rel_mae,
        undefined_rel_mse: tasks.len() - mse.len(),
        undefined_rel_mae: tasks.len() - mae.len(),
    }
}

/// Overall then per-class aggregates, in task-id order.
pub fn summarize(tasks: &[TaskResult]) -> Vec<ClassSummary> {
    let mut sorted: Vec<&TaskResult> = tasks.iter().collect();
    sorted.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let mut out = vec![summarize_group("overall", &sorted)];
    for c in HorizonClass::ALL {
        let group: Vec<&TaskResult> = sorted.iter().copied().filter(|t| t.class == c).collect();
        out.push(summarize_group(c.name(), &group));
    }
    out
}

fn evaluate_task(predictor: &Predictor, task: &EvalTask) -> Result<TaskResult> {
    let start = Instant::now();
    let pred = predictor.forecast(task)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let naive = task.baseline()?;
    let truth = task.truth();
    if pred.len() != task.horizon {
        return Err(Error::ShapeMismatch(format!("forecast has {} steps, expected {}", pred.len(), task.horizon)));
    }
    let err = |m: Metric, p: &[f64]| m.eval(p, &truth).ok_or(Error::NoObservations);
    Ok(TaskResult {
        task_id: task.id.clone(),
        horizon: task.horizon,
        class: task.horizon_class,
        mse_model: err(Metric::Mse, &pred)?,
        mse_naive: err(Metric::Mse, &naive)?,
        rel_mse: relative_error(&pred, &naive, &truth, Metric::Mse)?,
        mae_model: err(Metric::Mae, &pred)?,
        mae_naive: err(Metric::Mae, &naive)?,
        rel_mae: relative_error(&pred, &naive, &truth, Metric::Mae)?,
        wall_ms,
    })
}

/// Evaluates every task; failures are recorded, not fatal.
pub fn run_eval(predictor: &Predictor, tasks: &[EvalTask]) -> Result<EvalReport> {
    if tasks.is_empty() {
        return Err(Error::NoTasks);
    }
    let start = Instant::now();
    let mut results = Vec::new();
    let mut failed = Vec::new();
    for task in tasks {
        match evaluate_task(predictor, task) {
            Ok(r) => results.push(r),
            Err(e) => failed.push(FailedTask { task_id: task.id.clone(), error: e.to_string() }),
        }
    }
    results.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    failed.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let summary = summarize(&results);
    Ok(EvalReport { tasks: results, failed, summary, total_wall_ms: start.elapsed().as_secs_f64() * 1e3 })
}

pub fn run_eval_checkpoint(
    model: &ModelConfig,
    params: &ModelParams<f32>,
    tasks: &[EvalTask],
    cfg: &InferenceConfig,
) -> Result<EvalReport> {
    let f = PipelineForecaster { model, params, inference: cfg.clone() };
    run_eval(&Predictor::Model(&f), tasks)
}

pub fn write_report_csv(tasks: &[TaskResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for t in tasks {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<TaskResult>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn write_summary_csv(summary: &[ClassSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "stat", "overall", "short", "medium", "long"])?;
    let cell = |v: Option<f64>| v.map_or_else(|| "".to_string(), |x| x.to_string());
    type Pick = fn(&ClassSummary) -> Option<f64>;
    let rows: [(&str, &str, Pick); 4] = [
        ("rel_mse", "mean", |s| s.mean_rel_mse),
        ("rel_mse", "gmean", |s| s.gmean_rel_mse),
        ("rel_mae", "mean", |s| s.mean_rel_mae),
        ("rel_mae", "gmean", |s| s.gmean_rel_mae),
    ];
    for (metric, stat, pick) in rows {
        let mut rec = vec![metric.to_string(), stat.to_string()];
        rec.extend(summary.iter().map(|s| cell(pick(s))));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `report.csv`, `summary.csv` and `report.json` into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_report_csv(&report.tasks, &dir.join("report.csv"))?;
    write_summary_csv(&report.summary, &dir.join("summary.csv"))?;
    let json = serde_json::to_string_pretty(report)?;
    let path = dir.join("report.json");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}
