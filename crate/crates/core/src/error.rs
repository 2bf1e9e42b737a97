use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset has no interactions")]
    EmptyDataset,

    #[error("{side} index {index} out of range (count {count})")]
    IndexOutOfRange {
        side: &'static str,
        index: usize,
        count: usize,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("log10 of zero while computing {0}")]
    Log10OfZero(&'static str),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("sample {sample_id}: gave up after {retries} consecutive degenerate draws")]
    SamplingExhausted { sample_id: u64, retries: u32 },

    #[error("cannot split a graph with {0} edges (need at least 10)")]
    SplitInfeasible(usize),

    #[error("metric undefined: no user has held-out items")]
    MetricUndefined,

    #[error("shape mismatch: {0}")]
    ShapeError(String),

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    #[error("numerical failure: {0}")]
    NumericsError(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    TrainingDiverged { epoch: usize },

    #[error("collinear design matrix; offending columns: {}", .0.join(", "))]
    CollinearDesign(Vec<String>),

    #[error("degree distribution fit infeasible: {0}")]
    FitInfeasible(String),

    #[error("insufficient samples: need at least {needed} usable records, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("{0}")]
    ManifestError(String),

    #[error("{failed} of {total} samples failed, above the 10% abort threshold")]
    TooManyFailures { failed: usize, total: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
