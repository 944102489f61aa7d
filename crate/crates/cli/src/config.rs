use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Every setting a command can take. Values come from an optional TOML file and are
/// overridden by flags of the same name.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Panel file (long CSV: id, time, variables)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,

    /// Output file (estimate, mediate, synth) or directory (bench)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,

    /// Master seed for every random stream
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// irand, pooled, did_regression or did_reorganized
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,

    /// Comma-separated confounder columns
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confounders: Option<Vec<String>>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mediator: Option<String>,

    /// lower, upper or two_sided
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<String>,

    /// Number of subsamples
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,

    /// Permutations per subsample (0 skips the test)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,

    /// min_overlap or independent_uniform
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,

    /// Mediation engine: irand or pooled
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,

    /// Column kinds as name=kind (binary, ordinal, continuous, categorical)
    #[arg(long = "kind", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<String>>,

    /// Cut points turning a continuous treatment into ordinal categories
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cuts: Option<Vec<f64>>,

    /// lcd_like or bmi_like
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,

    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<Vec<usize>>,

    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_sigma: Option<Vec<f64>>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,

    /// Estimators compared by bench
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<String>>,

    /// Confounder autocorrelation for bench designs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,

    /// Follow-up confounder drift for bench designs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,

    /// Individuals to synthesize
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Summary-statistics CSV for synth (bundled cohort summary by default)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,

    /// Blank out synthesized values at the summary's missingness rates
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missingness: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config `{}`: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: &RunConfig) -> Self {
        let mut base = serde_json::to_value(self).expect("config serializes");
        if let (Value::Object(b), Value::Object(o)) = (&mut base, serde_json::to_value(over).expect("config serializes")) {
            for (k, v) in o {
                b.insert(k, v);
            }
        }
        serde_json::from_value(base).expect("merged config deserializes")
    }

    pub fn require<'a, T>(&self, value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
        value.as_ref().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
    }
}

/// Parses `"name"` into an enum that serializes as a snake_case string.
pub fn parse_name<T: serde::de::DeserializeOwned>(value: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_value(Value::String(value.to_string()))
        .map_err(|_| CliError::Usage(format!("unknown {what} `{value}`")))
}
