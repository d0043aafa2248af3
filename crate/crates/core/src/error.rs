use thiserror::Error;

/// Errors raised anywhere in the detection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error("invalid noise spec: {0}")]
    InvalidNoiseSpec(String),

    #[error("true labels are not available")]
    MissingTruth,

    #[error("invalid corruption config: {0}")]
    InvalidCorruptionConfig(String),

    #[error("corruption rate selects zero instances out of {0}")]
    EmptyCorruption(usize),

    #[error("invalid class count {0}: at least two classes are required")]
    InvalidClassCount(usize),

    #[error("incompatible datasets: {0}")]
    IncompatibleDatasets(String),

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("trajectory length {length} too short, encoder needs at least {required}")]
    InvalidLength { length: usize, required: usize },

    #[error("degenerate vector: norm below 1e-12")]
    DegenerateVector,

    #[error("cannot initialize centroid from an empty {0} set")]
    EmptyClusterInit(&'static str),

    #[error("degenerate cluster: {0}")]
    DegenerateCluster(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("flag-all baseline is undefined for a zero noise rate")]
    UndefinedBaseline,

    #[error("degenerate separation: two cluster centroids coincide")]
    DegenerateSeparation,

    #[error("split is degenerate: {0}")]
    SplitDegenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
