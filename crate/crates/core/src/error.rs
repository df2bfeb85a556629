use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("window shorter than kernel: length {len} < kernel {kernel}")]
    WindowShorterThanKernel { len: usize, kernel: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid model config: {0}")]
    ModelConfig(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("task {0} is not configured")]
    UnconfiguredTask(String),

    #[error("{path}:{line}: {msg}")]
    Csv { path: PathBuf, line: u64, msg: String },

    #[error("upsampling unsupported: native rate {0} Hz is below 10 Hz")]
    UpsamplingUnsupported(f64),

    #[error("unmapped {task} labels: {labels:?}")]
    UnmappedLabels { task: String, labels: Vec<String> },

    #[error("invalid synthetic spec: {0}")]
    Synthetic(String),

    #[error("client {0} has no training samples")]
    EmptyTrainSet(String),

    #[error("freeze violation on tensor {0}")]
    FreezeViolation(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("client {client} lacks task {task} required by the round")]
    MissingTask { client: String, task: String },

    #[error("unknown client {0}")]
    UnknownClient(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
