use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty series")]
    EmptySeries,

    #[error("stride exceeds length: stride {stride} > length {len}")]
    StrideExceedsLength { stride: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("no observations")]
    NoObservations,

    #[error("horizon {requested} exceeds available future; max feasible horizon is {max_feasible}")]
    HorizonTooLong { requested: usize, max_feasible: usize },

    #[error("irregular time index")]
    IrregularTimeIndex,

    #[error("duplicate timestamp at row {row}")]
    DuplicateTimestamp { row: usize },

    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("non-numeric cell at row {row}, column {column}: {value:?}")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("bad timestamp at row {row}: {value:?}")]
    BadTimestamp { row: usize, value: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("not a checkpoint")]
    NotACheckpoint,

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("truncated checkpoint: {0}")]
    TruncatedCheckpoint(String),

    #[error("tensor {name}: shape mismatch, config implies {expected:?}, file has {found:?}")]
    TensorShape { name: String, expected: Vec<usize>, found: Vec<usize> },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("no supervised positions")]
    NoSupervisedPositions,

    #[error("non-finite loss at step {step} (batch seed {batch_seed})")]
    NonFiniteLoss { step: usize, batch_seed: u64 },

    #[error("no tasks")]
    NoTasks,

    #[error("unknown generator family: {0}")]
    UnknownFamily(String),

    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
