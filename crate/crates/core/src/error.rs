use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv input is empty")]
    EmptyInput,
    #[error("label column `{0}` not found in header")]
    MissingLabel(String),
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("line {line}: expected {expected} fields, found {found}")]
    NonRectangular {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse `{value}` in column `{column}`")]
    Unparseable {
        line: u64,
        column: String,
        value: String,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid training parameters: {0}")]
    InvalidParams(String),
    #[error("training split has fewer than 2 distinct labels")]
    DegenerateTrainingSplit,

    #[error("forest document: {0}")]
    Schema(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("rules have mismatched feature counts ({0} vs {1})")]
    FeatureMismatch(usize, usize),
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
}
