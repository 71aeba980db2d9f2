use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty column")]
    EmptyColumn,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` has {found} values, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("no usable rows")]
    NoUsableRows,
    #[error("degenerate labels")]
    DegenerateLabels,
    #[error("constant sensor")]
    ConstantSensor,
    #[error("threshold for {expected} applied to column {found}")]
    ThresholdMismatch { expected: String, found: String },
    #[error("no positive examples")]
    NoPositiveExamples,
    #[error("no failure row has an earlier normal row for the same unit")]
    NoMatchedPairs,
    #[error("gate needs at least 2 inputs, got {0}")]
    GateArity(usize),
    #[error("no jointly non-missing rows")]
    NoJointRows,
    #[error("empty tree")]
    EmptyTree,
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid ground truth: {0}")]
    GroundTruth(String),
    #[error("no significant structure")]
    NoSignificantStructure,
    #[error("fewer than 2 sensors could be thresholded ({0})")]
    InsufficientVariables(usize),
    #[error("schema error: missing column(s) {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for outcomes that mean "nothing to learn here" rather than bad
    /// input: degenerate or unmatched failure columns and weak structure.
    pub fn is_skip(&self) -> bool {
        matches!(
            self,
            Error::NoSignificantStructure
                | Error::InsufficientVariables(_)
                | Error::NoPositiveExamples
                | Error::NoMatchedPairs
                | Error::DegenerateLabels
        )
    }
}
