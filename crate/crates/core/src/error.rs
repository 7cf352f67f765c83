use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmgError {
    #[error("line {line_no}: malformed record ({reason})")]
    MalformedLine { line_no: usize, reason: String },
    #[error("unknown gesture label {0}")]
    UnknownLabel(i64),
    #[error("file contains no samples")]
    EmptyFile,
    #[error("no recordings found under {0}")]
    NoRecordingsFound(PathBuf),
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<EmgError>,
    },
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("invalid windowing: window_len={window_len}, stride={stride}")]
    InvalidWindowing { window_len: usize, stride: usize },
    #[error("empty series")]
    EmptySeries,
    #[error("series too short: need at least {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("percent must lie strictly between 0 and 100, got {0}")]
    InvalidPercent(f64),
    #[error("channel {channel} of window at offset {offset}: {source}")]
    InChannel {
        channel: usize,
        offset: usize,
        #[source]
        source: Box<EmgError>,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
    #[error("empty node: gini impurity needs at least one sample")]
    EmptyNode,
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("row width {got} does not match training width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("forest has no fitted trees")]
    UnfittedForest,
    #[error("k={k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("k={k} exceeds {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("empty training set")]
    EmptyTraining,
    #[error("class {0} has no training samples")]
    EmptyClass(usize),
    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    TooFewSamplesPerClass {
        class: usize,
        count: usize,
        folds: usize,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("fold {fold}: {source}")]
    InFold {
        fold: usize,
        #[source]
        source: Box<EmgError>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl EmgError {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        EmgError::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, EmgError>;
