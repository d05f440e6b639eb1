use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CatError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CatError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: invalid record: {message}")]
    InvalidRecord { line: usize, message: String },

    #[error("line {line}: question {question_id:?} has inconsistent {field} across variants")]
    InconsistentQuestion {
        line: usize,
        question_id: String,
        field: &'static str,
    },

    #[error("line {line}: duplicate variant ({question_id:?}, {variant_id:?})")]
    DuplicateVariant {
        line: usize,
        question_id: String,
        variant_id: String,
    },

    #[error("duplicate question id {0:?} across divergence sets")]
    DuplicateQuestion(String),

    #[error("evaluation run contains no divergence sets")]
    EmptyRun,

    #[error("divergence set {0:?} contains no records")]
    EmptySet(String),

    #[error("invalid threshold grid: {0}")]
    InvalidGrid(String),

    #[error("threshold grid needs at least 2 points, got {0}")]
    DegenerateGrid(usize),

    #[error("curve has {values} values for a grid of {grid} thresholds")]
    CurveLength { grid: usize, values: usize },

    #[error("DTW requires non-empty sequences")]
    EmptySequence,

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("{0} options exceed the 26 letter labels")]
    LabelsExhausted(usize),

    #[error("option index {index} out of range for {option_count} options")]
    IndexOutOfRange { index: usize, option_count: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid question: {0}")]
    InvalidQuestion(String),

    #[error("compactness needs at least 2 responses, got {0}")]
    TooFewResponses(usize),

    #[error("question {0:?}: record lacks a soft score")]
    MissingSoftScore(String),

    #[error("growth slope needs a chance run named {0:?}")]
    MissingChance(String),

    #[error("growth slope needs at least 2 runs, got {0}")]
    TooFewRuns(usize),

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CatError::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad user input rather than by a failure inside the toolkit.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            CatError::Io { .. } | CatError::Csv(_) | CatError::Json(_)
        ) || matches!(self, CatError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}
