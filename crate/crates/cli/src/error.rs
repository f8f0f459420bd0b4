use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] loopseries::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for non-convergence, 3 for an unreliable reference, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use loopseries::Error as E;
        match self {
            CliError::Core(E::BpNonConvergence { .. } | E::SeriesNonConvergence { .. }) => 2,
            CliError::Core(E::ReferenceUnreliable(_)) => 3,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        use loopseries::Error as E;
        match self {
            CliError::Core(E::BpNonConvergence { .. }) => "bp-non-convergence",
            CliError::Core(E::SeriesNonConvergence { .. }) => "series-non-convergence",
            CliError::Core(E::ReferenceUnreliable(_)) => "reference-unreliable",
            CliError::Core(_) => "computation",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
            CliError::Config(_) => "config",
        }
    }

    /// Machine-readable record written to stderr on failure.
    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}
