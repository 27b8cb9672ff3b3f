mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng as _;
use serde::Serialize;

use tiny_tsm::harness::holdout::holdout_tasks;
use tiny_tsm::harness::{emit_plots, run_eval, write_report, EvalTask, PipelineForecaster, Predictor};
use tiny_tsm::inference::predict;
use tiny_tsm::model::{load_params, param_breakdown, param_count, save_params, ModelConfig, ModelParams};
use tiny_tsm::series::io::{read_csv, read_dataset, write_dataset, DatasetFormat};
use tiny_tsm::synthts::{generate, sample_batch_params};
use tiny_tsm::training::{write_loss_curve, DataStream, LossRecord, Objective, Trainer};
use tiny_tsm::{rng, TimeSeries};

use config::{DataSource, EvaluateFile, ForecastFile, GenerateConfig, ModelChoice, ModelFile, Preset, TaskSource, TrainFile};

/// Machine-readable failure printed as JSON on stderr.
#[derive(Debug, Serialize)]
pub struct CliError {
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), path: None }
    }

    pub fn at(mut self, pointer: String) -> Self {
        self.path = Some(pointer);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<tiny_tsm::Error> for CliError {
    fn from(e: tiny_tsm::Error) -> Self {
        CliError::new("runtime", e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("io", format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "tiny-tsm", version, about = "Tiny time series forecasting model: data, training, inference and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic series, one manifest plus CSV per series.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model and write its checkpoint and loss curve.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint file to write.
        #[arg(long)]
        out: PathBuf,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Forecast a CSV series with a trained checkpoint.
    Forecast {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input CSV or manifest holding a single series.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        horizon: usize,
        /// Forecast CSV; provenance goes to `<stem>.provenance.json` beside it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `inference.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint against seasonal naive and write the report and plots.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Required unless the config sets `baseline_only`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed used to build holdout tasks.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the parameter count of a model configuration as JSON.
    ParamCount {
        /// Config file with a `model` entry; defaults to the toy preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "config")]
        preset: Option<PresetArg>,
        /// Accepted for interface uniformity; has no effect.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PresetArg {
    Toy,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("error serializes"));
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Generate { config, out, seed } => cmd_generate(&config, &out, seed),
        Command::Train { config, out, seed } => cmd_train(&config, &out, seed),
        Command::Forecast { checkpoint, input, horizon, out, config, seed } => {
            cmd_forecast(&checkpoint, &input, horizon, &out, config.as_deref(), seed)
        }
        Command::Evaluate { config, checkpoint, out, seed } => cmd_evaluate(&config, checkpoint.as_deref(), &out, seed),
        Command::ParamCount { config, preset, .. } => cmd_param_count(config.as_deref(), preset),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn cmd_generate(path: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg: GenerateConfig = config::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.batch.validate().map_err(|e| CliError::new("invalid_config", e.to_string()).at("/batch".into()))?;
    cfg.augmentation
        .validate()
        .map_err(|e| CliError::new("invalid_config", e.to_string()).at("/augmentation".into()))?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut manifests = Vec::new();
    let mut skipped_real = 0;
    for i in 0..cfg.n_series {
        let s = rng::derive_seed(cfg.seed, i as u64);
        let params = sample_batch_params(&mut rng::seeded(s), &cfg.batch);
        let g = generate(&cfg.augmentation, &params, &[], s)?;
        skipped_real += g.skipped_real;
        let name = format!("series_{i:05}.json");
        write_dataset(std::slice::from_ref(&g.series), &out.join(&name), DatasetFormat::Manifest)?;
        manifests.push(name);
    }
    #[derive(Serialize)]
    struct Index<'a> {
        seed: u64,
        manifests: &'a [String],
        skipped_real: usize,
    }
    write_json(&Index { seed: cfg.seed, manifests: &manifests, skipped_real }, &out.join("index.json"))
}

/// Uniform draws from a fixed list of series.
struct FileStream(Vec<TimeSeries>);

impl DataStream for FileStream {
    fn sample(&mut self, seed: u64) -> tiny_tsm::Result<TimeSeries> {
        let i = rng::seeded(seed).random_range(0..self.0.len());
        Ok(self.0[i].clone())
    }
}

fn load_files(paths: &[PathBuf]) -> Result<Vec<TimeSeries>, CliError> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_dataset(p, DatasetFormat::from_path(p))?);
    }
    if all.is_empty() {
        return Err(CliError::new("invalid_config", "no training series").at("/data/files/paths".into()));
    }
    Ok(all)
}

fn cmd_train(path: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg: TrainFile = config::load(path)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let model = cfg.model.resolve();
    model.validate().map_err(|e| CliError::new("invalid_config", e.to_string()).at("/model".into()))?;
    cfg.train.validate().map_err(|e| CliError::new("invalid_config", e.to_string()).at("/train".into()))?;
    let params = match &cfg.init_checkpoint {
        Some(p) => {
            let (c, params) = load_params(p)?;
            if c != model {
                return Err(CliError::new("invalid_config", "checkpoint architecture differs from `model`")
                    .at("/init_checkpoint".into()));
            }
            params
        }
        None => ModelParams::init(&model, cfg.train.seed),
    };

    let curve_path = cfg.train.loss_curve_path.clone().unwrap_or_else(|| out.with_extension("loss.csv"));
    let mut synthetic;
    let mut files;
    let stream: &mut dyn DataStream = match &cfg.data {
        DataSource::Synthetic { batch, augmentation } => {
            batch.validate().map_err(|e| CliError::new("invalid_config", e.to_string()).at("/data/synthetic/batch".into()))?;
            augmentation
                .validate()
                .map_err(|e| CliError::new("invalid_config", e.to_string()).at("/data/synthetic/augmentation".into()))?;
            let (batch, augmentation) = (batch.clone(), augmentation.clone());
            synthetic = move |s: u64| {
                let params = sample_batch_params(&mut rng::seeded(s), &batch);
                generate(&augmentation, &params, &[], s).map(|g| g.series)
            };
            &mut synthetic
        }
        DataSource::Files { paths } => {
            files = FileStream(load_files(paths)?);
            &mut files
        }
    };

    let mut trainer = Trainer::new(model.clone(), params, cfg.train.clone(), cfg.objective, stream)?;
    let mut curve: Vec<LossRecord> = Vec::with_capacity(cfg.train.steps);
    for _ in 0..cfg.train.steps {
        let rec = trainer.step()?;
        curve.push(rec);
        if let (Some(every), Some(dir)) = (cfg.train.checkpoint_every, &cfg.train.checkpoint_dir) {
            if every > 0 && rec.step % every == 0 {
                fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
                save_params(&model, &trainer.params, &dir.join(format!("step_{:06}.ckpt", rec.step)))?;
            }
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    save_params(&model, &trainer.params, out)?;
    write_loss_curve(&curve, &curve_path)?;
    let objective = match cfg.objective {
        Objective::DenseNextToken => "dense_next_token",
        Objective::TestAtEnd => "test_at_end",
    };
    println!(
        "{}",
        serde_json::json!({
            "checkpoint": out,
            "loss_curve": curve_path,
            "steps": curve.len(),
            "objective": objective,
            "final_loss": curve.last().map(|r| r.loss),
        })
    );
    Ok(())
}

fn read_single(path: &Path) -> Result<TimeSeries, CliError> {
    let mut series = read_dataset(path, DatasetFormat::from_path(path))?;
    if series.len() != 1 {
        return Err(CliError::new("invalid_input", format!("{}: expected one series, found {}", path.display(), series.len())));
    }
    Ok(series.remove(0))
}

fn cmd_forecast(
    checkpoint: &Path,
    input: &Path,
    horizon: usize,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut cfg: ForecastFile = match config {
        Some(p) => config::load(p)?,
        None => ForecastFile { schema_version: config::SCHEMA_VERSION, ..Default::default() },
    };
    if let Some(s) = seed {
        cfg.inference.seed = s;
    }
    cfg.inference.validate().map_err(|e| CliError::new("invalid_config", e.to_string()).at("/inference".into()))?;
    let (model, params) = load_params(checkpoint)?;
    let series = read_single(input)?;
    let future = match &cfg.future {
        Some(p) => {
            let f = read_csv(p)?;
            Some((0..f.n_channels()).map(|c| f.channel(c).to_vec()).collect::<Vec<_>>())
        }
        None => None,
    };
    let result = predict(&model, &params, &series, horizon, future.as_deref(), &cfg.inference)?;

    let mut w = csv::Writer::from_path(out).map_err(|e| CliError::new("io", format!("{}: {e}", out.display())))?;
    let header: Vec<String> = std::iter::once("step".to_string()).chain(result.names.iter().cloned()).collect();
    let write = |w: &mut csv::Writer<fs::File>, rec: Vec<String>| {
        w.write_record(rec).map_err(|e| CliError::new("io", format!("{}: {e}", out.display())))
    };
    write(&mut w, header)?;
    for j in 0..horizon {
        let row = std::iter::once((j + 1).to_string()).chain(result.values.iter().map(|v| v[j].to_string())).collect();
        write(&mut w, row)?;
    }
    w.flush().map_err(|e| io_err(out, e))?;
    let sidecar = out.with_extension("provenance.json");
    write_json(
        &serde_json::json!({
            "checkpoint": checkpoint,
            "input": input,
            "horizon": horizon,
            "channels": result.channels,
            "provenance": result.provenance,
        }),
        &sidecar,
    )
}

fn dataset_tasks(path: &Path, context: usize, horizon: usize, season: Option<usize>) -> Result<Vec<EvalTask>, CliError> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    let series = read_dataset(path, DatasetFormat::from_path(path))?;
    let mut tasks = Vec::with_capacity(series.len());
    for (i, s) in series.into_iter().enumerate() {
        let ctx = context.min(s.len().saturating_sub(horizon));
        tasks.push(EvalTask::new(format!("{stem}_{i:04}"), s, ctx, horizon, season)?);
    }
    Ok(tasks)
}

fn read_loss_curve(path: &Path) -> Result<Vec<LossRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<LossRecord>, _>>()
        .map_err(|e| CliError::new("invalid_input", format!("{}: {e}", path.display())))
}

fn cmd_evaluate(path: &Path, checkpoint: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg: EvaluateFile = config::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.inference.validate().map_err(|e| CliError::new("invalid_config", e.to_string()).at("/inference".into()))?;
    let mut tasks = Vec::new();
    for (i, src) in cfg.tasks.iter().enumerate() {
        let built = match src {
            TaskSource::Holdout { kind, n, context, horizon } => {
                holdout_tasks(*kind, *n, *context, *horizon, rng::derive_seed(cfg.seed, i as u64))
                    .map_err(CliError::from)
            }
            TaskSource::Dataset { path, context, horizon, season } => dataset_tasks(path, *context, *horizon, *season),
        };
        tasks.extend(built.map_err(|e| e.at(format!("/tasks/{i}")))?);
    }

    let loaded = match (cfg.baseline_only, checkpoint) {
        (true, _) => None,
        (false, Some(p)) => Some(load_params(p)?),
        (false, None) => {
            return Err(CliError::new("invalid_argument", "--checkpoint is required unless baseline_only is set"));
        }
    };
    let report = match &loaded {
        None => run_eval(&Predictor::SeasonalNaive, &tasks)?,
        Some((model, params)) => {
            let f = PipelineForecaster { model, params, inference: cfg.inference.clone() };
            run_eval(&Predictor::Model(&f), &tasks)?
        }
    };
    write_report(&report, out)?;
    let curves = cfg
        .loss_curves
        .iter()
        .map(|p| {
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
            read_loss_curve(p).map(|c| (name, c))
        })
        .collect::<Result<Vec<_>, _>>()?;
    emit_plots(&report, &curves, out)?;
    let o = report.overall();
    println!(
        "{}",
        serde_json::json!({
            "tasks": report.tasks.len(),
            "failed": report.failed.len(),
            "mean_rel_mse": o.mean_rel_mse,
            "mean_rel_mae": o.mean_rel_mae,
            "report_dir": out,
        })
    );
    Ok(())
}

fn cmd_param_count(config: Option<&Path>, preset: Option<PresetArg>) -> Result<(), CliError> {
    let model: ModelConfig = match (config, preset) {
        (Some(p), _) => {
            let f: ModelFile = config::load(p)?;
            f.model.resolve()
        }
        (None, Some(PresetArg::Full)) => ModelChoice::Preset(Preset::Full).resolve(),
        (None, _) => ModelChoice::Preset(Preset::Toy).resolve(),
    };
    model.validate().map_err(|e| CliError::new("invalid_config", e.to_string()).at("/model".into()))?;
    let breakdown: serde_json::Map<String, serde_json::Value> =
        param_breakdown(&model).into_iter().map(|(k, v)| (k, v.into())).collect();
    println!("{}", serde_json::json!({ "total": param_count(&model), "breakdown": breakdown }));
    Ok(())
}
