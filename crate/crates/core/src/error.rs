use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WateError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("missing column `{column}`")]
    MissingColumn { column: String },
    #[error("non-binary treatment value `{value}` at row {row}, column `{column}`")]
    NonBinaryTreatment {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-numeric or non-finite cell `{value}` at row {row}, column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("covariate index {index} out of range for {available} covariates")]
    IndexOutOfRange { index: usize, available: usize },
    #[error("covariate index {index} listed more than once")]
    DuplicateIndex { index: usize },
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("treatment vector contains a single class")]
    SingleClass,
    #[error("design matrix is rank deficient (rank {rank} < {columns})")]
    RankDeficientDesign { rank: usize, columns: usize },
    #[error("logistic fit diverged (|beta|_inf = {norm:e}); data are likely separated")]
    Diverged { norm: f64 },
    #[error("too few observations: {rows} rows for {columns} columns")]
    TooFewObservations { rows: usize, columns: usize },
    #[error("arm {arm} has {size} observations, at least {required} required")]
    ArmTooSmall {
        arm: u8,
        size: usize,
        required: usize,
    },
    #[error("degenerate weights: {0}")]
    DegenerateWeights(&'static str),
    #[error("propensity {0} outside (0, 1)")]
    DomainError(f64),
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("sandwich variance is not obtainable: {0}")]
    SandwichUnobtainable(String),
    #[error("only {used} of {requested} bootstrap replicates succeeded (need {required})")]
    TooFewSuccessfulReplicates {
        used: usize,
        requested: usize,
        required: usize,
    },
    #[error("configuration error: {0}")]
    ConfigError(String),
}

pub type Result<T> = std::result::Result<T, WateError>;

impl From<std::io::Error> for WateError {
    fn from(e: std::io::Error) -> Self {
        WateError::Io(e.to_string())
    }
}

impl From<csv::Error> for WateError {
    fn from(e: csv::Error) -> Self {
        WateError::Csv(e.to_string())
    }
}
