use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at gene '{gene}', pair '{pair}'")]
    NonFinite { gene: String, pair: String },

    #[error("missing value for '{column}' in pair '{pair}'")]
    MissingValue { column: String, pair: String },

    #[error("unknown level '{level}' for categorical exposure '{column}'")]
    UnknownLevel { column: String, level: String },

    #[error("pair_id '{pair_id}' is missing from {source_name}")]
    Alignment { pair_id: String, source_name: String },

    #[error("duplicate pair_id '{0}'")]
    DuplicatePair(String),

    #[error("duplicate gene_id '{0}'")]
    DuplicateGene(String),

    #[error("pair '{0}' has no stratum label")]
    MissingStratum(String),

    #[error("stratum '{0}' is empty")]
    EmptyStratum(String),

    #[error("invalid value for {field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("design matrix is rank deficient (columns: {})", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("degenerate changepoint grid: {0}")]
    DegenerateGrid(String),

    #[error("backfitting did not converge (last RSS change {last_delta:e})")]
    NonConvergence { last_delta: f64 },

    #[error("carcinogen exposure '{0}' has a single level")]
    SingleLevel(String),

    #[error("exposure design has zero variance")]
    ZeroVariance,

    #[error("no case could be matched to an eligible control")]
    NoEligiblePairs,
}

impl Error {
    /// Numerical failures (as opposed to malformed or inconsistent data).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::DegenerateGrid(_)
                | Error::NonConvergence { .. }
                | Error::ZeroVariance
        )
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
