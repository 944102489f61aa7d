use irand_core::Error;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(Error::InvalidConfig(_)) => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                Error::MissingColumn(_) => "missing_column",
                Error::DuplicateTimePoint { .. } => "duplicate_time_point",
                Error::OrphanIndividual(_) => "orphan_individual",
                Error::NonBinaryTreatment { .. } => "non_binary_treatment",
                Error::InvalidTime(_) => "invalid_time",
                Error::NonNumericVariable { .. } => "non_numeric_variable",
                Error::InvalidSchema(_) => "invalid_schema",
                Error::LengthMismatch { .. } => "length_mismatch",
                Error::InvalidSummary { .. } => "invalid_summary",
                Error::SingleClass => "single_class",
                Error::DidNotConverge { .. } => "did_not_converge",
                Error::DimensionMismatch { .. } => "dimension_mismatch",
                Error::ZeroVariance => "zero_variance",
                Error::EmptyGroup(_) => "empty_group",
                Error::EmptyData(_) => "empty_data",
                Error::PlanMismatch => "plan_mismatch",
                Error::InvalidConfig(_) => "invalid_config",
                Error::Io(_) => "io",
                Error::Csv(_) => "csv",
                Error::Json(_) => "json",
            },
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.message(),
                "exit_code": self.exit_code(),
            }
        })
    }
}
