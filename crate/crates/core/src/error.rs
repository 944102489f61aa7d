use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` is missing from the input")]
    MissingColumn(String),

    #[error("individual `{id}` has more than one row at time {time}")]
    DuplicateTimePoint { id: String, time: u8 },

    #[error("individual `{0}` does not have both a baseline and a follow-up row")]
    OrphanIndividual(String),

    #[error("treatment column `{column}` holds non-binary value {value}")]
    NonBinaryTreatment { column: String, value: f64 },

    #[error("time column holds `{0}`, expected 0 or 1")]
    InvalidTime(String),

    #[error("column `{column}` holds non-numeric value `{value}`")]
    NonNumericVariable { column: String, value: String },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("assignment has length {got}, panel has {expected} individuals")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid summary for `{variable}`: {reason}")]
    InvalidSummary { variable: String, reason: String },

    #[error("all labels belong to one class")]
    SingleClass,

    #[error("logistic fit did not converge after {iterations} iterations")]
    DidNotConverge { iterations: usize },

    #[error("row width {got} does not match the model's {expected} covariates")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("treated group has zero variance but group means differ")]
    ZeroVariance,

    #[error("{0} group is empty")]
    EmptyGroup(&'static str),

    #[error("no usable rows: {0}")]
    EmptyData(String),

    #[error("total and direct effects were computed on different subsample plans")]
    PlanMismatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure comes from the numerics rather than from the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingleClass
                | Error::DidNotConverge { .. }
                | Error::ZeroVariance
                | Error::EmptyGroup(_)
                | Error::PlanMismatch
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
